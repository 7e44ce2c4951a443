"""Regenerate the bundled synthetic hospital log and its process tree.

The log is drawn from a hand-written stochastic process (not from any play-out
strategy) whose choices are skewed and, for the release type, depend on the
number of treatments, so it is structured but not a sample of any strategy
under test.
"""
import random
from pathlib import Path

from ptrecon.logio import EventLog, write_log

TREE = (
    "->( 'register', X( 'triage', tau ), +( 'lab', 'xray' ), *( 'treat', tau ), "
    "X( 'discharge', 'admit', 'transfer' ), X( tau, 'followup' ) )\n"
)


def patient(rng: random.Random) -> tuple[str, ...]:
    trace = ["register"]
    if rng.random() < 0.8:
        trace.append("triage")
    trace += ["lab", "xray"] if rng.random() < 0.85 else ["xray", "lab"]
    treatments = rng.choices([1, 2, 3], weights=[6, 3, 1])[0]
    trace += ["treat"] * treatments
    if treatments == 3:
        release = rng.choices(["admit", "transfer"], weights=[3, 1])[0]
    else:
        release = rng.choices(["discharge", "admit", "transfer"], weights=[16, 3, 1])[0]
    trace.append(release)
    if rng.random() < 0.3:
        trace.append("followup")
    return tuple(trace)


def main():
    rng = random.Random(20240501)
    log = EventLog.from_traces(patient(rng) for _ in range(400))
    out = Path(__file__).resolve().parents[1] / "src" / "ptrecon" / "data"
    write_log(log, out / "synthetic_hospital.variants")
    (out / "synthetic_hospital.tree").write_text(TREE, encoding="utf-8")
    print(f"{len(log)} traces, {len(log.variants)} variants, {len(log.alphabet)} activities")


if __name__ == "__main__":
    main()
