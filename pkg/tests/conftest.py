"""Test-suite configuration: prints a per-criterion summary for the acceptance module."""

import re
from collections import defaultdict

CRITERIA = {
    1: "twisted-butterfly decomposition matches closed forms, cost 2 bits",
    2: "product-measurement simulators reproduce joint Born statistics",
    3: "three-block product-basis protocol on C2xC6, branch table verified",
    4: "multi-round collapse equals direct evaluation",
    5: "depolarizing codebook values and the cap formula",
    6: "random access code bounds and the tilted-measurement reduction",
    7: "finite-message witness: exactness region, error floors, counting bound",
    8: "marker-state identities of the twisted-butterfly measurement",
    9: "multi-sender shift-basis protocols in both configurations",
}

_PATTERN = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, list[str]] = defaultdict(list)
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            match = _PATTERN.search(nodeid)
            if match:
                outcomes[int(match.group(1))].append(status)
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(CRITERIA):
        if number not in outcomes:
            continue
        ok = all(s == "passed" for s in outcomes[number])
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} - {CRITERIA[number]}")
