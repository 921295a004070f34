"""Collects one PASS/FAIL line per acceptance check for the terminal summary."""

LINES: list[str] = []


def verdict(label: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
    LINES.append(line)
    print(line)
    return ok
