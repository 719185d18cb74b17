"""Service endpoints orchestrating simulate / attack / report workflows."""

from __future__ import annotations

import csv
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..aes import IntermediateSelector
from ..archive import read_archive, write_archive
from ..attacks import (TemplateSet, cima_attack, dima_attack, recover_master_key, tima_attack,
                       tima_profile)
from ..config import load_config, run_config
from ..errors import ConfigurationError, IncompleteRecoveryError, ZleakError
from ..metrics import emit_figure_data
from ..pdn import MediumSpec, s11_transmission_line_sweep
from ..scenarios import full_key_bit_ids, kshare_bit_id
from ..touchstone import parse_touchstone_file, parse_vna_csv_file
from ..trace import FrequencyGrid, TraceBatch
from . import models as m

app = FastAPI(title="zleak", version=__version__)


@app.exception_handler(ZleakError)
async def _domain_error(request: Request, exc: ZleakError):
    return JSONResponse(status_code=422, content=m.ErrorResponse(
        error_class=type(exc).__name__, message=str(exc)).model_dump())


@app.exception_handler(FileNotFoundError)
async def _missing_file(request: Request, exc: FileNotFoundError):
    return JSONResponse(status_code=404, content=m.ErrorResponse(
        error_class="FileNotFoundError", message=str(exc)).model_dump())


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=422, content=m.ErrorResponse(
        error_class=type(exc).__name__, message=str(exc)).model_dump())


@app.get("/health", response_model=m.HealthResponse)
def health():
    return m.HealthResponse(version=__version__)


@app.post("/tl-model", response_model=m.TlModelResponse)
def tl_model(req: m.TlModelRequest):
    grid = FrequencyGrid(req.start_hz, req.stop_hz, req.points)
    medium = MediumSpec(req.relative_permittivity, req.length_m)
    trace = s11_transmission_line_sweep(grid, medium, req.printed_exponent)
    if req.out_csv:
        with open(req.out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency_hz", "s11_re", "s11_im", "mag_db", "phase_deg"])
            for f, s, db, ph in zip(grid.stamps(), trace.samples,
                                    trace.magnitude_db(), trace.phase_deg()):
                w.writerow([f, s.real, s.imag, db, ph])
    return m.TlModelResponse(points=grid.points, out_csv=req.out_csv)


@app.post("/simulate", response_model=m.SimulateResponse)
def simulate(req: m.SimulateRequest):
    if (req.config_path is None) == (req.config is None):
        raise ConfigurationError("provide exactly one of config_path or inline config")
    cfg = load_config(req.config_path) if req.config_path else req.config
    model, batch = run_config(cfg)
    write_archive(batch, req.out_path, header_extra={
        "device_fingerprint": model.grid.fingerprint(),
        "campaign_seed": (cfg.get("scenario") or {}).get("seed", 0),
        "scenario": (cfg.get("scenario") or {}).get("kind"),
    })
    return m.SimulateResponse(traces=len(batch), points=batch.grid.points, out_path=req.out_path)


def _ranking_payload(result, batch: TraceBatch, expect_key: str | None, top: int = 10):
    stamps = batch.grid.stamps()
    ranked = []
    for hyp, score in result.ranking.entries[:top]:
        peak = result.ranking.best_frequency.get(hyp)
        ranked.append(m.RankedKey(key=f"{hyp:02x}", score=score,
                                  peak_frequency_hz=float(stamps[peak]) if peak is not None else None))
    rank = success = None
    if expect_key is not None:
        rank = result.ranking.rank_of(int(expect_key, 16))
        success = rank == 1
    return ranked, rank, success


@app.post("/dima", response_model=m.AttackResponse)
def dima(req: m.DimaRequest):
    batch = read_archive(req.traces_path)
    result = dima_attack(batch, IntermediateSelector(req.bit_index),
                         range(2**req.key_space_bits), score=req.score)
    if req.band_report_csv:
        emit_figure_data("attack-matrix", req.band_report_csv, matrix=result.dom_matrix,
                         hypotheses=result.hypotheses)
    ranked, rank, success = _ranking_payload(result, batch, req.expect_key)
    return m.AttackResponse(best_key=f"{result.ranking.best():02x}", top=ranked,
                            expected_key_rank=rank, success=success,
                            degenerate_hypotheses=len(result.degenerate))


@app.post("/cima", response_model=m.AttackResponse)
def cima(req: m.CimaRequest):
    batch = read_archive(req.traces_path)
    result = cima_attack(batch, key_space=range(2**req.key_space_bits))
    if req.band_report_csv:
        emit_figure_data("attack-matrix", req.band_report_csv, matrix=result.corr_matrix,
                         hypotheses=result.hypotheses)
    if req.top_keys_csv:
        emit_figure_data("cima-top-keys", req.top_keys_csv, batch=batch, ranking=result.ranking)
    ranked, rank, success = _ranking_payload(result, batch, req.expect_key)
    return m.AttackResponse(best_key=f"{result.ranking.best():02x}", top=ranked,
                            expected_key_rank=rank, success=success)


def _derive_bit_ids(batch: TraceBatch, count: int) -> list[str]:
    scenario = (batch.metadata[0] or {}).get("scenario") if len(batch) else None
    if scenario == "masked_key_byte":
        ids = [kshare_bit_id(s, b) for s in range(3) for b in range(8)]
        if count != len(ids):
            raise ConfigurationError(f"masked_key_byte exposes 24 bits, requested {count}")
        return ids
    if scenario == "masked_full_key":
        return full_key_bit_ids(count)
    if scenario == "fanout":
        return ["fanout"]
    raise ConfigurationError(
        f"cannot derive target bits for scenario {scenario!r}; pass bit_ids explicitly")


@app.post("/tima/profile", response_model=m.TimaProfileResponse)
def tima_profile_ep(req: m.TimaProfileRequest):
    batch = read_archive(req.traces_path)
    if (req.bit_ids is None) == (req.bits is None):
        raise ConfigurationError("provide exactly one of bit_ids or bits")
    targets = req.bit_ids if req.bit_ids is not None else _derive_bit_ids(batch, req.bits)
    templates = tima_profile(batch, targets, p=req.pois, alpha=req.alpha, ridge=req.ridge)
    templates.save(req.out_path)
    shortfalls = [b for b, t in templates.templates.items() if t.shortfall]
    return m.TimaProfileResponse(bits=len(templates.templates), shortfall_bits=shortfalls,
                                 out_path=req.out_path)


@app.post("/tima/attack", response_model=m.TimaAttackResponse)
def tima_attack_ep(req: m.TimaAttackRequest):
    templates = TemplateSet.load(req.templates_path)
    batch = read_archive(req.traces_path)
    posterior = tima_attack(templates, batch, accumulate=req.accumulate)
    decisions = posterior.decisions()
    min_margin = min(d.margin for d in posterior.bits.values())
    shares = key_hex = success = None
    try:
        recovery = recover_master_key(posterior)
        shares = {str(byte): [f"{v:02x}" for v in vals]
                  for byte, vals in recovery.share_bytes.items()}
        key_hex = "".join(f"{recovery.key_bytes[b]:02x}" for b in sorted(recovery.key_bytes))
        if req.expect_key is not None:
            expect = req.expect_key.lower()
            success = key_hex == expect or (len(expect) == 2 and key_hex.startswith(expect)
                                            and len(recovery.key_bytes) == 1)
    except IncompleteRecoveryError:
        pass
    resp = m.TimaAttackResponse(decisions=decisions, min_margin=min_margin,
                                recovered_shares=shares, recovered_key=key_hex,
                                success=success, report_path=req.report_path)
    if req.report_path:
        report = resp.model_dump()
        report["log_likelihoods"] = {b: list(d.log_likelihoods)
                                     for b, d in posterior.bits.items()}
        with open(req.report_path, "w") as fh:
            json.dump(report, fh, indent=2)
    return resp


@app.post("/report", response_model=m.ReportResponse)
def report(req: m.ReportRequest):
    batch = read_archive(req.traces_path)
    emit_figure_data(req.which, req.out_csv, batch=batch, label=req.label, labels=req.labels)
    return m.ReportResponse(out_csv=req.out_csv)


@app.post("/ingest", response_model=m.IngestResponse)
def ingest(req: m.IngestRequest):
    if (req.touchstone_path is None) == (req.csv_path is None):
        raise ConfigurationError("provide exactly one of touchstone_path or csv_path")
    if req.touchstone_path:
        trace = parse_touchstone_file(req.touchstone_path)
    else:
        trace = parse_vna_csv_file(req.csv_path)
    batch = TraceBatch(trace.grid, trace.samples[None, :], [trace.metadata])
    write_archive(batch, req.out_path, header_extra={"source": trace.metadata["source"]})
    return m.IngestResponse(points=trace.grid.points,
                            source_format=trace.metadata["format"], out_path=req.out_path)
