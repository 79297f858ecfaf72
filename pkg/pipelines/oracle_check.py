# pipelines/oracle_check.py
from __future__ import annotations

import logging

from config.errors import OracleFailure
from oracle.checks import CHECKS, run_checks

logger = logging.getLogger(__name__)


def cmd_oracle_check(args) -> dict:
    """Run the oracle suite (or the --checks subset); raises OracleFailure naming every
    failed check."""
    names = getattr(args, "checks", None)
    selected = [n.strip() for n in names.split(",") if n.strip()] if names else list(CHECKS)
    results = run_checks(selected, seed=int(getattr(args, "seed", 0) or 0),
                         count=getattr(args, "count", None))
    report = {
        "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail,
                    "seconds": round(r.seconds, 3)} for r in results],
        "passed": sum(r.passed for r in results),
        "failed": [r.name for r in results if not r.passed],
    }
    if report["failed"]:
        for r in results:
            if not r.passed:
                logger.error("%s failed: %s", r.name, r.detail)
        raise OracleFailure("oracle checks failed: " + ", ".join(report["failed"]))
    return report
