"""Tables recording experiment runs and their results."""
import datetime as dt
import json
import logging
import typing as tp

from sqlalchemy import Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import Mapped, Session, mapped_column, relationship, sessionmaker

from chiralroute.store.base import RecordBase
from chiralroute.types import FidelityCurve, PeakReport

logger = logging.getLogger(__name__)


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(tzinfo=None)


class ExperimentRun(RecordBase):
    __tablename__ = "experiment_run"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    command: Mapped[str] = mapped_column(String(32), nullable=False)
    config: Mapped[str] = mapped_column(Text, nullable=False)
    created_at: Mapped[dt.datetime] = mapped_column(default=_utcnow)
    summary: Mapped[tp.Optional[float]] = mapped_column(Float, nullable=True)

    peaks: Mapped[tp.List["PeakRecord"]] = relationship(
        back_populates="run", cascade="all, delete-orphan", order_by="PeakRecord.id"
    )
    curve: Mapped[tp.List["CurvePoint"]] = relationship(
        back_populates="run", cascade="all, delete-orphan", order_by="CurvePoint.t"
    )

    @property
    def settings(self) -> dict:
        return json.loads(self.config)


class PeakRecord(RecordBase):
    __tablename__ = "peak"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey("experiment_run.id"), nullable=False)
    t: Mapped[float] = mapped_column(Float, nullable=False)
    param: Mapped[float] = mapped_column(Float, nullable=False)
    value: Mapped[float] = mapped_column(Float, nullable=False)
    width_t: Mapped[float] = mapped_column(Float, nullable=False)
    width_param: Mapped[float] = mapped_column(Float, nullable=False)
    wrong_output_prob: Mapped[float] = mapped_column(Float, nullable=False)

    run: Mapped[ExperimentRun] = relationship(back_populates="peaks")

    @classmethod
    def from_report(cls, report: PeakReport) -> "PeakRecord":
        return cls(
            t=report.t,
            param=report.param,
            value=report.value,
            width_t=report.width_t,
            width_param=report.width_param,
            wrong_output_prob=report.wrong_output_prob,
        )

    def to_report(self) -> PeakReport:
        return PeakReport(
            t=self.t,
            param=self.param,
            value=self.value,
            width_t=self.width_t,
            width_param=self.width_param,
            wrong_output_prob=self.wrong_output_prob,
        )


class CurvePoint(RecordBase):
    __tablename__ = "curve_point"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey("experiment_run.id"), nullable=False)
    t: Mapped[float] = mapped_column(Float, nullable=False)
    fidelity: Mapped[float] = mapped_column(Float, nullable=False)
    stderr: Mapped[tp.Optional[float]] = mapped_column(Float, nullable=True)

    run: Mapped[ExperimentRun] = relationship(back_populates="curve")


def open_store(url: str) -> sessionmaker:
    """Create the tables at ``url`` if needed and return a session factory."""
    engine = create_engine(url)
    RecordBase.metadata.create_all(bind=engine)
    logger.debug("result store ready at %s", engine.url.render_as_string())
    return sessionmaker(engine, expire_on_commit=False)


def record_scan(
    session: Session,
    command: str,
    config: dict,
    peaks: tp.Sequence[PeakReport],
) -> ExperimentRun:
    """Store a scan run and its peaks in one transaction."""
    run = ExperimentRun(
        command=command,
        config=json.dumps(config, sort_keys=True),
        summary=max((p.value for p in peaks), default=None),
        peaks=[PeakRecord.from_report(p) for p in peaks],
    )
    return run.add(session, commit=True)


def record_curve(
    session: Session, command: str, config: dict, curve: FidelityCurve
) -> ExperimentRun:
    """Store a fidelity curve; the run summary is its maximum."""
    stderr = curve.stderr if curve.stderr is not None else [None] * len(curve)
    run = ExperimentRun(
        command=command,
        config=json.dumps(config, sort_keys=True),
        summary=float(curve.values.max()) if len(curve) else None,
        curve=[
            CurvePoint(t=float(t), fidelity=float(f), stderr=None if e is None else float(e))
            for t, f, e in zip(curve.times, curve.values, stderr)
        ],
    )
    return run.add(session, commit=True)


def record_summary(
    session: Session, command: str, config: dict, summary: tp.Optional[float]
) -> ExperimentRun:
    """Store a run that produced a single headline number."""
    run = ExperimentRun(
        command=command, config=json.dumps(config, sort_keys=True), summary=summary
    )
    return run.add(session, commit=True)
