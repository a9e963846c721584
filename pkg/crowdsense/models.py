from sqlalchemy import Column, Integer, String, DateTime, Text
from sqlalchemy.orm import declarative_base
from datetime import datetime, timezone

Base = declarative_base()


def _utcnow():
    return datetime.now(timezone.utc).replace(tzinfo=None)


# One invocation of a pipeline stage
class StageRunModel(Base):
    __tablename__ = 'stage_runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    stage = Column(String(20), nullable=False, index=True)
    status = Column(String(10), nullable=False, default='ok')
    exit_code = Column(Integer, nullable=False, default=0)
    error_code = Column(String(50))
    in_path = Column(Text)
    out_path = Column(Text)
    config_json = Column(Text, nullable=False, default='{}')
    summary_json = Column(Text, nullable=False, default='{}')
    started_at = Column(DateTime, nullable=False, default=_utcnow)
    finished_at = Column(DateTime, nullable=False, default=_utcnow)

    def __repr__(self):
        return f"<StageRunModel {self.id} {self.stage} {self.status}>"
