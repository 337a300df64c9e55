from chiralroute.store.base import RecordBase
from chiralroute.store.models import (
    CurvePoint,
    ExperimentRun,
    PeakRecord,
    open_store,
    record_curve,
    record_scan,
    record_summary,
)
