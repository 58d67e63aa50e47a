"""Collects one summary line per acceptance criterion for the terminal report."""
LINES = {}


def report(criterion: int, passed: bool, detail: str):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    LINES[criterion] = line
    print(line)
    return passed
