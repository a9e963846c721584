import json
from datetime import datetime
from typing import Any, Dict, List, Optional

from .database import get_session, close_session
from .models import StageRunModel
from .exceptions import ValidationException, DataPersistenceException

STATUSES = ("ok", "error")


def record_stage_run(stage: str, status: str, exit_code: int, started_at: datetime, finished_at: datetime,
                     config: Optional[Dict[str, Any]] = None, summary: Optional[Dict[str, Any]] = None,
                     in_path: Optional[str] = None, out_path: Optional[str] = None,
                     error_code: Optional[str] = None) -> int:
    # Save one stage invocation, return its id
    if not stage:
        raise ValidationException("Stage name required", "INVALID_STAGE")
    if status not in STATUSES:
        raise ValidationException(f"Status must be one of {STATUSES}", "INVALID_STATUS")

    session = get_session()
    try:
        run = StageRunModel(
            stage=stage,
            status=status,
            exit_code=exit_code,
            error_code=error_code,
            in_path=in_path,
            out_path=out_path,
            config_json=json.dumps(config or {}, sort_keys=True),
            summary_json=json.dumps(summary or {}, sort_keys=True),
            started_at=started_at,
            finished_at=finished_at
        )
        session.add(run)
        session.commit()
        session.refresh(run)
        return run.id
    except Exception as e:
        session.rollback()
        raise DataPersistenceException(f"Failed to record stage run: {str(e)}", "LEDGER_WRITE_FAILED")
    finally:
        close_session(session)


def query_stage_runs(stage: Optional[str] = None, limit: Optional[int] = None) -> List[StageRunModel]:
    # Most recent runs first, optionally for one stage
    session = get_session()
    try:
        query = session.query(StageRunModel)
        if stage:
            query = query.filter_by(stage=stage)
        query = query.order_by(StageRunModel.id.desc())
        if limit:
            query = query.limit(limit)
        return query.all()
    finally:
        close_session(session)


def get_stage_run(run_id: int) -> Optional[StageRunModel]:
    session = get_session()
    try:
        return session.query(StageRunModel).filter_by(id=run_id).first()
    finally:
        close_session(session)


def run_summary(run: StageRunModel) -> Dict[str, Any]:
    # Decoded view of a ledger row
    return {
        "id": run.id,
        "stage": run.stage,
        "status": run.status,
        "exit_code": run.exit_code,
        "error_code": run.error_code,
        "in_path": run.in_path,
        "out_path": run.out_path,
        "config": json.loads(run.config_json or "{}"),
        "summary": json.loads(run.summary_json or "{}"),
        "started_at": run.started_at,
        "finished_at": run.finished_at,
    }
