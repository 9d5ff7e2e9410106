import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import ArpackError

from app.core.canonicalize import canonicalize_json, round_floats, to_builtin
from app.core.engine_version import ENGINE_VERSION
from app.db.schemas import CheckRecord, Environment, SuiteConfig, VerificationReport
from app.engine.builder import Builder, Workload
from app.engine.suites import CheckTask, Outcome, collect_tasks

logger = logging.getLogger(__name__)

# Failures of a single check that must not abort the run
CHECK_ERRORS = (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError, ArpackError)


def config_hash(config: SuiteConfig) -> str:
    return hashlib.sha256(canonicalize_json(config.model_dump()).encode()).hexdigest()


def _run_task(task: CheckTask) -> Tuple[CheckTask, Optional[Outcome], Optional[str]]:
    try:
        return task, task.compute(), None
    except CHECK_ERRORS as e:
        logger.warning("check raised", extra={"fields": {"check": task.name, "error": f"{type(e).__name__}: {e}"}})
        return task, None, f"{type(e).__name__}: {e}"


def generate_record(task: CheckTask, outcome: Optional[Outcome], error: Optional[str]) -> CheckRecord:
    """
    Verdict: an explicit outcome verdict wins; otherwise residual <= tolerance.
    Raised checks and non-finite residuals fail.
    """
    if outcome is None:
        passed, residual, summary = False, None, {}
    else:
        residual = None if outcome.residual is None else float(outcome.residual)
        summary = round_floats(to_builtin(outcome.summary))
        if outcome.passed is not None:
            passed = bool(outcome.passed)
        else:
            passed = residual is not None and task.tolerance is not None and residual <= task.tolerance
        if residual is not None and not math.isfinite(residual):
            passed, residual = False, None
            summary["non_finite_residual"] = True

    record = CheckRecord(
        name=task.name,
        suite=task.suite,
        check_id=task.check_id,
        inputs=round_floats(to_builtin(task.inputs)),
        residual=None if residual is None else round_floats(residual),
        summary=summary,
        tolerance=task.tolerance,
        verdict="pass" if passed else "fail",
        error=error,
    )
    logger.info("check_completed", extra={"fields": {
        "check": record.name, "verdict": record.verdict, "residual": record.residual,
    }})
    return record


def execute(workload: Workload, workers: int = 1) -> List[CheckRecord]:
    tasks = collect_tasks(workload)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(task) for task in tasks]
    records = [generate_record(*result) for result in results]
    # Single writer, ordered by name: identical output for any worker count
    records.sort(key=lambda r: r.name)
    return records


def run_suite(config: SuiteConfig) -> VerificationReport:
    """
    Runs every check the configuration selects and assembles the report.
    Configuration problems raise BuildError before any check runs.
    """
    # 1. Resolve the workload
    workload = Builder().build(config)

    # 2. Run the checks
    records = execute(workload, workers=config.workers)

    # 3. Assemble
    passed = all(r.verdict == "pass" for r in records)
    logger.info("suite finished", extra={"fields": {
        "suites": workload.suites, "checks": len(records), "failed": sum(r.verdict == "fail" for r in records),
    }})
    return VerificationReport(
        config=config,
        config_hash=config_hash(config),
        checks=records,
        environment=Environment(engine_version=str(ENGINE_VERSION)),
        passed=passed,
    )
