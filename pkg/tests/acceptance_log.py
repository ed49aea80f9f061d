"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

RESULTS = {}


def record(n: int, title: str, ok: bool, detail: str):
    RESULTS[n] = (title, ok, detail)
    print(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}; {detail}")
    return ok
