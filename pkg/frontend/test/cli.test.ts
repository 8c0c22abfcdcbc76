import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { runCli } from "../src/cli.js";

function tempDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
}

const SWEEP = [
  "# resolved-config",
  "d,k,m,k_over_m,delta,nstar,found,trials,master_seed",
  "128,24,2,12.000000,0.33,144,1,200,7",
  "128,24,3,8.000000,0.33,64,1,200,7",
  "128,24,4,6.000000,0.33,36,1,200,7",
  "128,24,6,4.000000,0.33,16,1,200,7",
].join("\n");

const BOUNDS = [
  "lemma,n,m,t,empirical,std_err,analytic,pass",
  "heavy_q3,10,4,0.1,0.8,0.002,0.95,1",
  "heavy_q3,10,4,0.3,0.5,0.002,0.9,1",
].join("\n");

test("phase subcommand writes a figure and its sidecar", () => {
  const dir = tempDir();
  const input = path.join(dir, "sweep.csv");
  const output = path.join(dir, "fig.svg");
  fs.writeFileSync(input, SWEEP);
  assert.equal(runCli(["phase", "--in", input, "--out", output]), 0);
  assert.ok(fs.statSync(output).size > 0);
  const sidecar = fs.readFileSync(`${output}.txt`, "utf-8");
  assert.match(sidecar, /slope=2\.0000/);
});

test("tails subcommand writes a figure and its sidecar", () => {
  const dir = tempDir();
  const input = path.join(dir, "bounds.csv");
  const output = path.join(dir, "tails.svg");
  fs.writeFileSync(input, BOUNDS);
  assert.equal(runCli(["tails", "--in", input, "--out", output]), 0);
  assert.match(fs.readFileSync(`${output}.txt`, "utf-8"), /discrepancies=0/);
});

test("all-not-found sweep exits nonzero and writes no image", () => {
  const dir = tempDir();
  const input = path.join(dir, "sweep.csv");
  const output = path.join(dir, "fig.svg");
  fs.writeFileSync(
    input,
    "d,k,m,k_over_m,delta,nstar,found,trials,master_seed\n128,24,2,12.000000,0.33,,0,200,7\n",
  );
  assert.equal(runCli(["phase", "--in", input, "--out", output]), 1);
  assert.ok(!fs.existsSync(output));
});

test("schema mismatch exits nonzero", () => {
  const dir = tempDir();
  const input = path.join(dir, "bad.csv");
  fs.writeFileSync(input, "d,k\n1,2\n");
  assert.equal(runCli(["phase", "--in", input, "--out", path.join(dir, "x.svg")]), 1);
});

test("bad invocations exit nonzero", () => {
  assert.equal(runCli([]), 1);
  assert.equal(runCli(["phase"]), 1);
  assert.equal(runCli(["phase", "--in", "x.csv"]), 1);
  assert.equal(runCli(["mystery", "--in", "a", "--out", "b"]), 1);
});

test("rendering identical input twice gives identical bytes", () => {
  const dir = tempDir();
  const input = path.join(dir, "sweep.csv");
  fs.writeFileSync(input, SWEEP);
  const outA = path.join(dir, "a.svg");
  const outB = path.join(dir, "b.svg");
  assert.equal(runCli(["phase", "--in", input, "--out", outA]), 0);
  assert.equal(runCli(["phase", "--in", input, "--out", outB]), 0);
  assert.equal(fs.readFileSync(outA, "utf-8"), fs.readFileSync(outB, "utf-8"));
});
