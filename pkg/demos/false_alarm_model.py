"""The step-coverage matrix and what it implies for the false-alarm rate.

    python demos/false_alarm_model.py
"""

from loginaudit.report import COVERAGE, EventModel, estimate_false_positive, exclusion_from_steps, union_expressions


def main() -> None:
    print("coverage (step -> events it can reject):")
    for step, events in COVERAGE.items():
        print(f"  {step}: {events}")
    print()
    for expr in union_expressions().values():
        print(" ", expr)

    # a blacklist that catches 90% of keyword pages, perfect structural checks
    rates = {
        "A": {e: 0.9 for e in COVERAGE["A"]},
        "B": {e: 1.0 for e in COVERAGE["B"]},
        "C": {e: 1.0 for e in COVERAGE["C"]},
        "D": {e: 1.0 for e in COVERAGE["D"]},
    }
    q = exclusion_from_steps(rates)
    model = EventModel([0.30, 0.25, 0.05, 0.20, 0.05, 0.10, 0.02], q)
    print("\nQ(R1..R6) =", [round(x, 3) for x in q])
    print(f"estimated false-alarm rate: {estimate_false_positive(model):.4f}")


if __name__ == "__main__":
    main()
