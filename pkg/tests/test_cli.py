"""Tests for the command-line interface and its CSV artifacts."""

import pytest

from supprec.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_VERIFY_FAILED, main
from supprec.model import load_instance


def write_config(tmp_path, text, name="config.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


TRIAL_CONFIG = """
[problem]
d = 8
k = 2
m = 4
n = 60
seed = 12345

[experiment]
trials = 40
"""


def data_lines(path):
    """Non-comment lines of a CSV artifact."""
    lines = path.read_text(encoding="utf-8").splitlines()
    return [ln for ln in lines if not ln.startswith("#")]


class TestConfigErrors:
    def test_unknown_key_is_fatal(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[problem]\nd = 8\nk = 2\nm = 4\nn = 5\nfoo = 1\n")
        code = main(["trial", "--config", cfg, "--stdout"])
        assert code == EXIT_CONFIG
        assert "problem.foo" in capsys.readouterr().err

    def test_unknown_section_is_fatal(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[mystery]\nx = 1\n")
        assert main(["trial", "--config", cfg, "--stdout"]) == EXIT_CONFIG
        assert "mystery" in capsys.readouterr().err

    def test_out_of_range_delta_names_field(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "[problem]\nd = 8\nk = 2\nm = 4\n\n[experiment]\ndelta = 1.5\ntrials = 10\n",
        )
        code = main(["nstar", "--config", cfg, "--stdout"])
        assert code == EXIT_CONFIG
        assert "experiment.delta" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["trial", "--config", str(tmp_path / "absent.ini"), "--stdout"])
        assert code == EXIT_CONFIG

    def test_missing_required_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[problem]\nd = 8\nk = 2\nm = 4\nn = 5\n")
        assert main(["trial", "--config", cfg, "--stdout"]) == EXIT_CONFIG
        assert "experiment.trials" in capsys.readouterr().err

    def test_output_required(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        assert main(["trial", "--config", cfg]) == EXIT_CONFIG


class TestTrialCommand:
    def test_writes_single_row_csv(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        out = tmp_path / "trial.csv"
        assert main(["trial", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = data_lines(out)
        assert rows[0] == (
            "d,k,m,n,sigma2,x_min,x_max,signal_mode,trials,successes,rate,"
            "ci_low,ci_high,master_seed"
        )
        assert len(rows) == 2
        fields = rows[1].split(",")
        assert fields[0] == "8" and fields[-1] == "12345"
        assert 0.0 <= float(fields[10]) <= 1.0

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["trial", "--config", cfg, "--out", str(a)]) == EXIT_OK
        assert main(["trial", "--config", cfg, "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_stdout_output(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        assert main(["trial", "--config", cfg, "--stdout"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "# resolved-config" in out
        assert "d,k,m,n," in out

    def test_seed_override_changes_master_seed(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        out = tmp_path / "o.csv"
        assert main(["trial", "--config", cfg, "--out", str(out), "--seed", "99"]) == EXIT_OK
        assert data_lines(out)[1].split(",")[-1] == "99"

    def test_unwritable_output_is_io_error(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        code = main(["trial", "--config", cfg, "--out", str(tmp_path / "no/dir/x.csv")])
        assert code == EXIT_IO


SWEEP_CONFIG = """
[problem]
d = 16
k = 4
seed = 777

[experiment]
delta = 0.3333333333333333
trials = 60
n_max = 512

[sweep]
m_list = 4, 6
"""


class TestSweepCommand:
    def test_sweep_rows_and_summary(self, tmp_path):
        cfg = write_config(tmp_path, SWEEP_CONFIG)
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = data_lines(out)
        assert rows[0] == "d,k,m,k_over_m,delta,nstar,found,trials,master_seed"
        assert len(rows) == 3
        assert rows[1].split(",")[3] == "1.000000"  # k/m to six decimals
        assert rows[2].split(",")[3] == "0.666667"
        summary = tmp_path / "sweep_summary.csv"
        srows = data_lines(summary)
        assert srows[0] == "window_low,window_high,points,slope,intercept"
        assert int(srows[1].split(",")[2]) == 2

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path, SWEEP_CONFIG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", "--config", cfg, "--out", str(a), "--threads", "1"]) == EXIT_OK
        assert main(["sweep", "--config", cfg, "--out", str(b), "--threads", "2"]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()


class TestNStarCommand:
    def test_easy_point(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[problem]\nd = 2\nk = 1\nm = 8\nseed = 5\n\n"
            "[experiment]\ndelta = 0.33\ntrials = 50\nn_max = 64\n",
        )
        out = tmp_path / "nstar.csv"
        assert main(["nstar", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = data_lines(out)
        assert rows[0] == "d,k,m,delta,nstar,found,trials,last_rate,master_seed"
        fields = rows[1].split(",")
        assert fields[5] == "1"
        assert int(fields[4]) >= 1


VERIFY_PASS_CONFIG = """
[problem]
seed = 31

[verify_bounds]
lemmas = chisq_lower, chisq_upper
n_list = 20
mu_list = 0.0
t_grid = 0.5, 1.0
replications = 4000
"""

VERIFY_FAIL_CONFIG = """
[problem]
seed = 32

[constants]
c_heavy = 1000.0

[verify_bounds]
lemmas = heavy_q3
n_list = 10
m_list = 4
t_grid = 0.1
replications = 4000
"""


class TestVerifyBoundsCommand:
    def test_passing_run_exits_zero(self, tmp_path):
        cfg = write_config(tmp_path, VERIFY_PASS_CONFIG)
        out = tmp_path / "bounds.csv"
        assert main(["verify-bounds", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = data_lines(out)
        assert rows[0] == "lemma,n,m,t,empirical,std_err,analytic,pass"
        assert len(rows) == 1 + 2 * 2  # two lemmas x two t values
        assert all(row.split(",")[-1] == "1" for row in rows[1:])

    def test_failing_run_exits_one(self, tmp_path):
        cfg = write_config(tmp_path, VERIFY_FAIL_CONFIG)
        out = tmp_path / "bounds.csv"
        assert main(["verify-bounds", "--config", cfg, "--out", str(out)]) == EXIT_VERIFY_FAILED
        assert any(row.split(",")[-1] == "0" for row in data_lines(out)[1:])

    def test_unknown_lemma_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[verify_bounds]\nlemmas = lemma_x\n")
        assert main(["verify-bounds", "--config", cfg, "--stdout"]) == EXIT_CONFIG
        assert "lemma_x" in capsys.readouterr().err

    def test_empty_probe_list_passes_with_header_only(self, tmp_path):
        cfg = write_config(tmp_path, "[verify_bounds]\nlemmas =\n")
        out = tmp_path / "empty.csv"
        assert main(["verify-bounds", "--config", cfg, "--out", str(out)]) == EXIT_OK
        assert data_lines(out) == ["lemma,n,m,t,empirical,std_err,analytic,pass"]


class TestVerifySeparationCommand:
    def test_large_n_point_passes(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[problem]\nd = 8\nk = 2\nm = 6\nn = 4000\nseed = 3\n\n"
            "[experiment]\ndelta = 0.3333333333333333\ntrials = 10\n",
        )
        out = tmp_path / "sep.csv"
        assert main(["verify-separation", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = data_lines(out)
        assert rows[0] == "d,k,m,n,delta,instances,satisfied,fraction,master_seed"
        assert float(rows[1].split(",")[7]) >= 2.0 / 3.0

    def test_tiny_n_point_fails(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[problem]\nd = 16\nk = 8\nm = 2\nn = 1\nseed = 4\n\n"
            "[experiment]\ndelta = 0.3333333333333333\ntrials = 10\n",
        )
        code = main(["verify-separation", "--config", cfg, "--stdout"])
        assert code == EXIT_VERIFY_FAILED


class TestBoundsEvalCommand:
    def run(self, capsys, *tokens):
        code = main(["bounds-eval", *tokens])
        out = capsys.readouterr().out
        rows = [ln for ln in out.splitlines() if ln and not ln.startswith("#")]
        return code, rows

    def test_sample_complexity_example(self, capsys):
        code, rows = self.run(
            capsys, "sample_complexity_upper", "k=10", "m=2", "d=100", "delta=0.1"
        )
        assert code == EXIT_OK
        assert rows[0] == "name,args,value,flag"
        fields = rows[1].split(",")
        assert fields[0] == "sample_complexity_upper"
        assert fields[2] == "173"
        assert fields[3] == "below_measurement_regime"

    def test_chisq_upper_tail_example(self, capsys):
        code, rows = self.run(capsys, "chisq_upper_tail", "n=1", "sigma=1", "mu=0", "t=2")
        assert code == EXIT_OK
        assert float(rows[1].split(",")[2]) == pytest.approx(0.778801, abs=1e-6)

    def test_heavy_q3_zero_t_clamps(self, capsys):
        code, rows = self.run(capsys, "heavy_q3", "t=0")
        assert code == EXIT_OK
        assert float(rows[1].split(",")[2]) == 1.0

    def test_rosenthal(self, capsys):
        code, rows = self.run(capsys, "rosenthal", "p=2", "n=1", "lp_norm=1", "l2_norm=1")
        assert code == EXIT_OK
        assert float(rows[1].split(",")[2]) == pytest.approx(3.414213562373095)

    def test_cube_moment(self, capsys):
        code, rows = self.run(capsys, "chisq_cube_moment", "p=2", "m=2")
        assert code == EXIT_OK
        assert float(rows[1].split(",")[2]) == 21952.0

    def test_unknown_name_lists_valid(self, capsys):
        code = main(["bounds-eval", "mystery_bound"])
        err = capsys.readouterr().err
        assert code == EXIT_CONFIG
        assert "sample_complexity_upper" in err

    def test_unknown_argument_rejected(self, capsys):
        code = main(["bounds-eval", "chisq_cube_moment", "p=2", "m=2", "zz=3"])
        assert code == EXIT_CONFIG


class TestGenerateCommand:
    def test_dump_round_trips(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        out = tmp_path / "inst.npz"
        assert main(["generate", "--config", cfg, "--out", str(out)]) == EXIT_OK
        inst = load_instance(out)
        inst.validate()
        assert inst.config.d == 8 and inst.config.seed == 12345

    def test_stdout_rejected(self, tmp_path):
        cfg = write_config(tmp_path, TRIAL_CONFIG)
        assert main(["generate", "--config", cfg, "--stdout"]) == EXIT_CONFIG
