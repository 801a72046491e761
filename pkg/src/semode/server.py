"""HTTP service exposing a model to the companion UI.

Single-user interactive tool: one session holds the current model, a model
history stack for before/after comparison, the bound dataset, and at most
one running edit-and-refit job.  Reads always serve the latest committed
model; a job swaps the model in atomically when it finishes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from .bench import evaluate_model
from .datasets import Dataset
from .editing import EditSpec, apply_edits
from .errors import DomainError, SemodeError
from .fit import FitSettings
from .propmap import SemanticModel

MAX_POINTS = 2000
IDLE, RUNNING, DONE, FAILED = "idle", "running", "done", "failed"


@dataclass
class JobState:
    status: str = IDLE
    progress: str = ""
    error: str | None = None
    old_rmse: float | None = None
    new_rmse: float | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "progress": self.progress,
            "error": self.error,
            "old_rmse": self.old_rmse,
            "new_rmse": self.new_rmse,
        }


class Session:
    """Model + dataset + job state behind a single lock.

    Reads take the lock only long enough to grab references; the refit job
    runs on a worker thread and commits its result atomically.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._history: list[SemanticModel] = []
        self._dataset: Dataset | None = None
        self._job = JobState()
        self._worker: threading.Thread | None = None

    # -- state access --------------------------------------------------------

    def load_model(self, model: SemanticModel) -> None:
        with self._lock:
            self._history.append(model)

    def load_dataset(self, dataset: Dataset) -> None:
        with self._lock:
            self._dataset = dataset

    @property
    def model(self) -> SemanticModel | None:
        with self._lock:
            return self._history[-1] if self._history else None

    @property
    def dataset(self) -> Dataset | None:
        with self._lock:
            return self._dataset

    def job_state(self) -> dict:
        with self._lock:
            return self._job.to_dict()

    def revert(self) -> bool:
        with self._lock:
            if len(self._history) < 2:
                return False
            self._history.pop()
            return True

    # -- edit-and-refit job ----------------------------------------------------

    def start_edit(self, spec: EditSpec, settings: FitSettings | None = None) -> None:
        with self._lock:
            if self._job.status == RUNNING:
                raise _Busy()
            if not self._history:
                raise DomainError("no model loaded")
            if self._dataset is None:
                raise DomainError("no dataset bound; editing needs data to refit")
            model = self._history[-1]
            dataset = self._dataset
            self._job = JobState(status=RUNNING, progress="validating")

        def work():
            try:
                old = float(np.mean(evaluate_model(model, dataset, mode="train_c0")))
                with self._lock:
                    self._job.progress = "refitting"
                edited = apply_edits(model, spec, dataset, settings)
                new = float(np.mean(evaluate_model(edited, dataset, mode="train_c0")))
                with self._lock:
                    self._history.append(edited)
                    self._job.status = DONE
                    self._job.progress = "done"
                    self._job.old_rmse = old
                    self._job.new_rmse = new
            except Exception as exc:
                with self._lock:
                    self._job.status = FAILED
                    self._job.error = str(exc)

        self._worker = threading.Thread(target=work, daemon=True)
        self._worker.start()

    def wait(self, timeout: float | None = None) -> None:
        if self._worker is not None:
            self._worker.join(timeout)


class _Busy(SemodeError):
    pass


def _model_payload(session: Session, points: int = 200) -> dict:
    model = session.model
    if model is None:
        raise HTTPException(status_code=404, detail="no model loaded")
    lo, hi = model.comp_map.x_range
    grid = np.linspace(lo, hi, min(points, MAX_POINTS))
    return {
        "model": model.to_dict(),
        "branch_boundaries": [float(b) for b in model.comp_map.boundaries],
        "property_curves": model.property_curves(grid),
    }


def create_app(session: Session, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="semode", docs_url=None, redoc_url=None)

    @app.get("/api/model")
    def get_model(points: int = 200):
        return _model_payload(session, points)

    @app.get("/api/semantics")
    def get_semantics(x0: float):
        model = session.model
        if model is None:
            raise HTTPException(status_code=404, detail="no model loaded")
        try:
            rep = model.predict_semantics(x0)
        except SemodeError as exc:
            raise HTTPException(status_code=400, detail=f"x0: {exc}")
        return rep.to_dict()

    @app.get("/api/predict")
    def get_predict(x0: float, points: int = 200):
        model = session.model
        if model is None:
            raise HTTPException(status_code=404, detail="no model loaded")
        points = max(2, min(points, MAX_POINTS))
        try:
            traj = model.predict_trajectory(x0, mode="infer_c2")
        except SemodeError as exc:
            raise HTTPException(status_code=400, detail=f"x0: {exc}")
        ts = np.linspace(model.config.t_start, model.config.t_max, points)
        out = {
            "x0": x0,
            "status": traj.status,
            "composition": str(traj.rep.composition),
            "t": [float(v) for v in ts],
            "x": [float(v) for v in traj(ts)],
            "data": None,
        }
        ds = session.dataset
        if ds is not None and len(ds):
            gaps = np.abs(ds.x0s - x0)
            i = int(np.argmin(gaps))
            span = float(ds.x0s.max() - ds.x0s.min()) or 1.0
            if gaps[i] <= 0.01 * span:
                s = ds.samples[i]
                out["data"] = {
                    "x0": float(s.x0),
                    "t": [float(v) for v in s.times],
                    "y": [float(v) for v in s.values],
                }
        return out

    @app.post("/api/edit")
    def post_edit(payload: dict):
        try:
            spec = EditSpec.from_dict(payload)
        except SemodeError as exc:
            raise HTTPException(status_code=400, detail=f"edits: {exc}")
        try:
            session.start_edit(spec)
        except _Busy:
            raise HTTPException(status_code=409, detail="a fit job is already running")
        except SemodeError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"accepted": True}

    @app.get("/api/job")
    def get_job():
        return session.job_state()

    @app.post("/api/revert")
    def post_revert():
        if not session.revert():
            raise HTTPException(status_code=400, detail="nothing to revert to")
        return {"reverted": True}

    @app.get("/api/dataset/summary")
    def get_dataset_summary():
        ds = session.dataset
        if ds is None:
            raise HTTPException(status_code=404, detail="no dataset bound")
        x0s = ds.x0s
        return {
            "count": len(ds),
            "x0_min": float(x0s.min()),
            "x0_max": float(x0s.max()),
            "observations_per_sample": int(len(ds.samples[0].times)),
            "metadata": ds.metadata,
        }

    root = Path(static_dir) if static_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if root.is_dir():
        app.mount("/assets", StaticFiles(directory=str(root)), name="assets")

        @app.get("/")
        def index():
            return FileResponse(str(root / "index.html"))

    return app
