"""
Database module for recorded stability sweeps.

This module defines SQLAlchemy models for:
- SweepRun: One stability sweep (resolved config, fitted model, residual)
- SweepEntry: One noise level of a sweep

It also provides session management, initialization and the helpers that
record, summarize and compare sweep runs. Recording is opt-in; sweep CSV
outputs never depend on the database.
"""

import json
import logging
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, Generator, Optional

from sqlalchemy import (
    create_engine,
    Column,
    Integer,
    String,
    Text,
    Float,
    Boolean,
    DateTime,
    ForeignKey,
)
from sqlalchemy.orm import declarative_base, sessionmaker, Session
from sqlalchemy.pool import StaticPool

from .config import DB_URL

logger = logging.getLogger(__name__)

Base = declarative_base()
SessionLocal = sessionmaker(autocommit=False, autoflush=False)
engine = None


def set_database_url(url: str) -> None:
    """
    Bind the session factory to a database URL.

    SQLite connections are shared across threads; in-memory databases use a
    StaticPool so every session sees the same data.
    """
    global engine
    engine_kwargs = {}
    if url.startswith("sqlite"):
        engine_kwargs["connect_args"] = {"check_same_thread": False}
        if ":memory:" in url:
            engine_kwargs["poolclass"] = StaticPool
    engine = create_engine(url, **engine_kwargs)
    SessionLocal.configure(bind=engine)


set_database_url(DB_URL)


# ============================================================================
# Models
# ============================================================================

class SweepRun(Base):
    """
    A recorded stability sweep.

    Stores the resolved configuration as JSON next to the fitted two-term
    model error ~ C1 delta^beta + C2 (log 1/delta)^{-mu}.
    """
    __tablename__ = "sweep_runs"

    id = Column(Integer, primary_key=True, index=True)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False, index=True)

    phantom = Column(String, nullable=False, index=True)
    c = Column(Float, nullable=False)
    alpha = Column(Float, nullable=False)
    beta = Column(Float, nullable=False)
    mu = Column(Float, nullable=False)
    config_json = Column(Text, nullable=False)

    # Fitted model
    c1 = Column(Float, nullable=True)
    c2 = Column(Float, nullable=True)
    relative_residual = Column(Float, nullable=True)
    num_entries = Column(Integer, nullable=False)

    notes = Column(Text, nullable=True)

    def __repr__(self):
        return f"<SweepRun(id={self.id}, phantom={self.phantom}, c={self.c}, entries={self.num_entries}, residual={self.relative_residual})>"


class SweepEntry(Base):
    """Per-delta row of a sweep: n*, mean error over seeds and the error-split bound."""
    __tablename__ = "sweep_entries"

    id = Column(Integer, primary_key=True, index=True)
    sweep_run_id = Column(Integer, ForeignKey("sweep_runs.id"), nullable=False, index=True)

    delta = Column(Float, nullable=False)
    n_star = Column(Integer, nullable=False)
    n_used = Column(Integer, nullable=False)
    clamped = Column(Boolean, default=False, nullable=False)
    mean_error = Column(Float, nullable=False)
    lemma13_bound = Column(Float, nullable=True)
    fit_residual = Column(Float, nullable=True)

    def __repr__(self):
        return f"<SweepEntry(id={self.id}, run_id={self.sweep_run_id}, delta={self.delta}, error={self.mean_error})>"


# ============================================================================
# Session Management
# ============================================================================

@contextmanager
def get_session() -> Generator[Session, None, None]:
    """
    Context manager for database sessions.

    Usage:
        with get_session() as session:
            session.add(obj)

    Commits on success, rolls back on errors, always closes.
    """
    session = SessionLocal()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def init_db() -> None:
    """Create all tables. Idempotent."""
    Base.metadata.create_all(bind=engine)
    logger.info(f"Database initialized at: {engine.url}")


def drop_all_tables() -> None:
    """Drop all tables. Used by tests."""
    Base.metadata.drop_all(bind=engine)


# ============================================================================
# Sweep History
# ============================================================================

def _nan_to_none(value) -> Optional[float]:
    value = float(value)
    return None if value != value else value


def record_sweep(result, phantom: str, notes: Optional[str] = None) -> int:
    """
    Store a SweepResult.

    Args:
        result: SweepResult from recon.stability_sweep.
        phantom: Phantom name or description.
        notes: Free text.

    Returns:
        ID of the new SweepRun.
    """
    config = result.config
    with get_session() as session:
        sweep_run = SweepRun(
            created_at=datetime.utcnow(),
            phantom=phantom,
            c=config["c"],
            alpha=config["alpha"],
            beta=config["beta"],
            mu=config["mu"],
            config_json=json.dumps(config, sort_keys=True, default=float),
            c1=_nan_to_none(result.coefficients[0]),
            c2=_nan_to_none(result.coefficients[1]),
            relative_residual=_nan_to_none(result.relative_residual),
            num_entries=len(result.table),
            notes=notes,
        )
        session.add(sweep_run)
        session.flush()  # Get sweep_run.id

        for row in result.table.itertuples(index=False):
            session.add(SweepEntry(
                sweep_run_id=sweep_run.id,
                delta=float(row.delta),
                n_star=int(row.n_star),
                n_used=int(row.n_used),
                clamped=bool(row.clamped),
                mean_error=float(row.mean_error),
                lemma13_bound=_nan_to_none(row.lemma13_bound),
                fit_residual=_nan_to_none(row.fit_residual),
            ))
        run_id = sweep_run.id

    logger.info(f"Recorded sweep run {run_id} ({len(result.table)} entries)")
    return run_id


def get_sweep_run_summary(sweep_run_id: int) -> Dict[str, Any]:
    """
    Summary of a recorded sweep.

    Returns:
        Dictionary with run metadata and entries, or {"error": ...}.
    """
    with get_session() as session:
        sweep_run = session.query(SweepRun).filter(SweepRun.id == sweep_run_id).first()

        if not sweep_run:
            return {"error": f"SweepRun {sweep_run_id} not found"}

        entries = (
            session.query(SweepEntry)
            .filter(SweepEntry.sweep_run_id == sweep_run_id)
            .order_by(SweepEntry.delta.desc())
            .all()
        )

        return {
            "id": sweep_run.id,
            "created_at": sweep_run.created_at.isoformat(),
            "phantom": sweep_run.phantom,
            "c": sweep_run.c,
            "alpha": sweep_run.alpha,
            "c1": sweep_run.c1,
            "c2": sweep_run.c2,
            "relative_residual": sweep_run.relative_residual,
            "num_entries": sweep_run.num_entries,
            "config": json.loads(sweep_run.config_json),
            "entries": [
                {
                    "delta": entry.delta,
                    "n_star": entry.n_star,
                    "n_used": entry.n_used,
                    "clamped": entry.clamped,
                    "mean_error": entry.mean_error,
                    "lemma13_bound": entry.lemma13_bound,
                }
                for entry in entries
            ],
            "notes": sweep_run.notes,
        }


def compare_sweep_runs(run_id_1: int, run_id_2: int) -> Dict[str, Any]:
    """
    Compare two recorded sweeps.

    Returns:
        Dictionary with both summaries, the change in fit residual and the
        change in mean error for every delta both runs share.
    """
    summary_1 = get_sweep_run_summary(run_id_1)
    summary_2 = get_sweep_run_summary(run_id_2)

    if "error" in summary_1 or "error" in summary_2:
        return {"error": "One or both sweep runs not found"}

    errors_1 = {entry["delta"]: entry["mean_error"] for entry in summary_1["entries"]}
    errors_2 = {entry["delta"]: entry["mean_error"] for entry in summary_2["entries"]}
    shared = sorted(set(errors_1) & set(errors_2), reverse=True)

    residual_1 = summary_1.get("relative_residual")
    residual_2 = summary_2.get("relative_residual")
    return {
        "run_1": summary_1,
        "run_2": summary_2,
        "deltas": {
            "relative_residual": (
                residual_2 - residual_1 if residual_1 is not None and residual_2 is not None else None
            ),
            "mean_error": {delta: errors_2[delta] - errors_1[delta] for delta in shared},
        },
    }
