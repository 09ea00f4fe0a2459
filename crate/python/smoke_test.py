"""Smoke test for the tcpsim extension module.

Build and place the module next to this script first:

    cargo build --release -p tcpsim-py
    cp target/release/libtcpsim_py.so python/tcpsim.so
    python3 python/smoke_test.py
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import tcpsim  # noqa: E402


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print(f"ok  {what}")


def main():
    cfg = tcpsim.Config.paper(0.0, "tahoe", duration_s=5.0)
    check(cfg.duration_s == 5.0 and cfg.seed == 1, "dumbbell config overrides")
    check(tcpsim.Config.from_toml(cfg.to_toml()) == cfg, "toml round trip")

    run = tcpsim.simulate(cfg)
    ftp = run.summary(1)
    check(ftp["goodput_bps"] > 0 and ftp["dropped_loss"] == 0, "lossless run delivers data")
    check(run.conservation_holds(), "packet conservation")
    check(run.trace_text() == tcpsim.simulate(cfg).trace_text(), "same seed, same trace")

    cfg.set_variant("reno")
    check(tcpsim.simulate(cfg).trace_text() == run.trace_text(), "tahoe and reno agree without loss")

    done = tcpsim.simulate(tcpsim.Config.paper(0.0, "reno", ftp_total_bytes=100_000, scripted_losses=[(1, 90)]))
    s = done.summary(1)
    check(s["rto_count"] == 0 and s["retransmissions"] == 1, "reno recovers one loss without a timeout")
    check(s["completion_time_s"] is not None, "bounded transfer completes")

    series = run.throughput_series(1, 1.0)
    check(len(series) == 5 and all(bps > 0 for _, bps in series), "throughput series")
    check(run.cwnd_trace(1)[0] == (0.0, 1.0), "cwnd starts at one segment")
    check(tcpsim.analyze_trace(run.trace_text(), 1, duration_s=run.end_time_s) == run.summary(1), "saved trace analysis matches")

    table = tcpsim.sweep(tcpsim.Config.paper(0.0, duration_s=2.0), [0.0, 0.2], ["tahoe", "reno"], [1, 2])
    check(len(table["rows"]) == 8 and len(table["cells"]) == 4, "sweep shape")
    check(table["rows_csv"].startswith("loss_rate,variant,seed,"), "sweep csv header")

    est = tcpsim.RttEstimator()
    check(est.update(0.2) == (0.2, 0.1, 1.0), "first rtt sample")

    for bad in (lambda: tcpsim.Config.paper(1.5), lambda: tcpsim.Config.paper(0.1, "vegas"),
                lambda: tcpsim.Config.from_toml("[topology]\nnodes = 2\nextra = 1\n")):
        try:
            bad()
        except tcpsim.ConfigError as e:
            check(isinstance(e, ValueError), f"ConfigError: {e}")
        else:
            raise AssertionError("bad config accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
