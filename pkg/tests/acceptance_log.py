"""Collects one PASS/FAIL line per acceptance criterion for the run summary."""

LINES: list[str] = []


def report(k: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    LINES.append(line)
    print(line)
    return ok
