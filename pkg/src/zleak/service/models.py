"""Pydantic request/response models for the service endpoints.

File paths are interpreted on the service host; the service is a local
orchestration daemon, not a public API.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class TlModelRequest(BaseModel):
    start_hz: float = Field(gt=0)
    stop_hz: float
    points: int = Field(ge=2)
    relative_permittivity: float = Field(ge=1)
    length_m: float = Field(ge=0)
    printed_exponent: bool = False
    out_csv: str | None = None


class TlModelResponse(BaseModel):
    points: int
    out_csv: str | None = None


class SimulateRequest(BaseModel):
    config_path: str | None = None
    config: dict | None = None
    out_path: str


class SimulateResponse(BaseModel):
    traces: int
    points: int
    out_path: str


class RankedKey(BaseModel):
    key: str
    score: float
    peak_frequency_hz: float | None = None


class DimaRequest(BaseModel):
    traces_path: str
    bit_index: int | None = 0  # None = multi-bit analysis over all 8
    score: str = "mean"
    key_space_bits: int = 8
    band_report_csv: str | None = None
    expect_key: str | None = None


class CimaRequest(BaseModel):
    traces_path: str
    key_space_bits: int = 8
    band_report_csv: str | None = None
    top_keys_csv: str | None = None
    expect_key: str | None = None


class AttackResponse(BaseModel):
    best_key: str
    top: list[RankedKey]
    expected_key_rank: int | None = None
    success: bool | None = None
    degenerate_hypotheses: int = 0


class TimaProfileRequest(BaseModel):
    traces_path: str
    bit_ids: list[str] | None = None
    bits: int | None = None  # derive ids from the batch's scenario when set
    pois: int = 5
    alpha: float = 0.01
    ridge: float = 1e-6
    out_path: str


class TimaProfileResponse(BaseModel):
    bits: int
    shortfall_bits: list[str]
    out_path: str


class TimaAttackRequest(BaseModel):
    templates_path: str
    traces_path: str
    accumulate: str = "log"
    report_path: str | None = None
    expect_key: str | None = None


class TimaAttackResponse(BaseModel):
    decisions: dict
    min_margin: float
    recovered_shares: dict | None = None  # byte index -> share byte hex list
    recovered_key: str | None = None
    success: bool | None = None
    report_path: str | None = None


class ReportRequest(BaseModel):
    which: str
    traces_path: str
    label: str | None = None
    labels: list[str] | None = None
    out_csv: str


class ReportResponse(BaseModel):
    out_csv: str


class IngestRequest(BaseModel):
    touchstone_path: str | None = None
    csv_path: str | None = None
    out_path: str


class IngestResponse(BaseModel):
    points: int
    source_format: str
    out_path: str


class ErrorResponse(BaseModel):
    error_class: str
    message: str
