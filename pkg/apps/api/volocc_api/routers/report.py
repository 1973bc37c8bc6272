import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Union

from fastapi import APIRouter, HTTPException

from ..models.schemas import (
    ErrorCode,
    ErrorDetail,
    EvtReport,
    ExportRequest,
    ExportResponse,
    McReport,
    RateStudyReport,
    ReportSummary,
)

logger = logging.getLogger("api")
router = APIRouter()

AnyReport = Union[McReport, EvtReport, RateStudyReport]

# In-memory run store; reports live for the lifetime of the process
reports_storage: Dict[str, AnyReport] = {}


def _not_found(run_id: str) -> HTTPException:
    return HTTPException(
        status_code=404,
        detail=ErrorDetail(code=ErrorCode.INPUT_ERROR, message="Run report not found", details={"run_id": run_id}).model_dump(mode="json"),
    )


def _n_replicas(report: AnyReport) -> int:
    return report.config.n_replicas


def long_rows(report: AnyReport) -> Iterator[List]:
    """(run_id, kind, label, metric, value) rows for the flat CSV export."""
    if isinstance(report, McReport):
        for row in report.rows:
            for metric in ("true_mean", "bias", "mad", "mc_stderr"):
                yield [report.run_id, report.kind, f"alpha={row.alpha}", metric, getattr(row, metric)]
    elif isinstance(report, EvtReport):
        for metric in ("ks_distance", "ks_pvalue", "median_normalized", "m_n", "c_n"):
            yield [report.run_id, report.kind, f"b_n={report.b_n}", metric, getattr(report, metric)]
        for m in report.maxima:
            yield [report.run_id, report.kind, f"replica={m.replica}", "normalized", m.normalized]
    else:
        for row in report.rows:
            yield [report.run_id, report.kind, f"n={row.n}", "mean_eta", row.mean_eta]
        yield [report.run_id, report.kind, "fit", "slope", report.slope]


@router.get("/run/{run_id}", response_model=Union[McReport, EvtReport, RateStudyReport])
async def get_run_report(run_id: str):
    """Get a specific run report by ID."""
    if run_id not in reports_storage:
        raise _not_found(run_id)
    return reports_storage[run_id]


@router.get("/runs", response_model=List[ReportSummary])
async def list_runs(limit: int = 50, offset: int = 0):
    """List stored runs, newest first."""
    reports = sorted(reports_storage.values(), key=lambda r: r.created_at, reverse=True)
    return [
        ReportSummary(
            run_id=r.run_id,
            kind=r.kind,
            created_at=r.created_at,
            elapsed_seconds=r.elapsed_seconds,
            n_replicas=_n_replicas(r),
        )
        for r in reports[offset : offset + limit]
    ]


@router.post("/export", response_model=ExportResponse)
async def export_report(request: ExportRequest):
    """Export one run, or all runs, to a JSON or CSV file."""
    if request.run_id and request.run_id not in reports_storage:
        raise _not_found(request.run_id)
    reports = [reports_storage[request.run_id]] if request.run_id else list(reports_storage.values())
    try:
        output_path = Path(request.path)
        output_path.parent.mkdir(parents=True, exist_ok=True)

        if request.format == "json":
            export_data = {
                "reports": [r.model_dump(mode="json") for r in reports],
                "export_time": datetime.now(timezone.utc).isoformat(),
                "total_reports": len(reports),
            }
            with open(output_path, "w", encoding="utf-8") as f:
                json.dump(export_data, f, indent=2)
            records = len(reports)
        else:
            records = 0
            with open(output_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["run_id", "kind", "label", "metric", "value"])
                for report in reports:
                    for row in long_rows(report):
                        writer.writerow(row)
                        records += 1
        logger.info(f"Exported {records} records to {output_path}")
        return ExportResponse(ok=True, path=str(output_path), format=request.format, records_exported=records)

    except OSError as e:
        raise HTTPException(
            status_code=500,
            detail=ErrorDetail(code=ErrorCode.EXPORT_ERROR, message=f"Export failed: {e}", details={"path": request.path}).model_dump(mode="json"),
        )


@router.delete("/run/{run_id}")
async def delete_report(run_id: str):
    """Delete a stored run report."""
    if run_id not in reports_storage:
        raise _not_found(run_id)
    del reports_storage[run_id]
    return {"ok": True, "message": f"Report {run_id} deleted successfully"}
