#!/usr/bin/env node
/**
 * Figure CLI for the experiment CSV artifacts.
 *
 *   plot phase --in sweep.csv --out fig.svg [--linear] [--no-ref-slopes]
 *   plot tails --in bounds.csv --out tails.svg
 *
 * Every figure is written as SVG (whatever the output extension) together
 * with a `<out>.txt` sidecar holding the fitted numbers, so checks can read
 * values instead of pixels.
 */

import * as fs from "node:fs";

import { renderPhase } from "./phase.js";
import { renderTails } from "./tails.js";

const USAGE =
  "usage: plot phase --in sweep.csv --out fig.svg [--linear] [--no-ref-slopes]\n" +
  "       plot tails --in bounds.csv --out tails.svg\n";

interface Args {
  command: string;
  input: string;
  output: string;
  linear: boolean;
  refSlopes: boolean;
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  if (command !== "phase" && command !== "tails") {
    throw new Error(`unknown command ${JSON.stringify(command ?? "")}\n${USAGE}`);
  }
  let input = "";
  let output = "";
  let linear = false;
  let refSlopes = true;
  for (let i = 0; i < rest.length; i++) {
    const flag = rest[i];
    if (flag === "--in") {
      input = rest[++i] ?? "";
    } else if (flag === "--out") {
      output = rest[++i] ?? "";
    } else if (flag === "--linear") {
      linear = true;
    } else if (flag === "--no-ref-slopes") {
      refSlopes = false;
    } else {
      throw new Error(`unknown flag ${flag}\n${USAGE}`);
    }
  }
  if (!input || !output) {
    throw new Error(`both --in and --out are required\n${USAGE}`);
  }
  return { command, input, output, linear, refSlopes };
}

export function runCli(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 1;
  }
  try {
    const text = fs.readFileSync(args.input, "utf-8");
    let svg: string;
    let sidecar: string;
    if (args.command === "phase") {
      const result = renderPhase(text, { logAxes: !args.linear, refSlopes: args.refSlopes });
      svg = result.svg;
      sidecar = result.sidecar;
    } else {
      const result = renderTails(text);
      svg = result.svg;
      sidecar = result.sidecar;
    }
    fs.writeFileSync(args.output, svg, "utf-8");
    fs.writeFileSync(`${args.output}.txt`, sidecar, "utf-8");
    return 0;
  } catch (err) {
    process.stderr.write(`plot ${args.command}: ${(err as Error).message}\n`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("plot")) {
  process.exit(runCli(process.argv.slice(2)));
}
