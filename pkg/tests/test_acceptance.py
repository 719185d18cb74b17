"""End-to-end acceptance gate.

Each test covers one numbered acceptance criterion and prints a single
PASS/FAIL line with its headline statistic. Tolerances are part of the
contract; do not loosen them to make a failing run pass.
"""

import json
import time
from pathlib import Path

import numpy as np
from scipy.stats import chi2, kstest

from oracles import boundary_condition_s11, brute_force_dima
from zleak.aes import IntermediateSelector, intermediate_value, share_split
from zleak.archive import read_archive, write_archive
from zleak.attacks import cima_attack, dima_attack, recover_master_key, tima_attack, tima_profile
from zleak.errors import NoWitnessError, OpenCircuitError
from zleak.metrics import difference_of_means, success_rate
from zleak.pdn import (MediumSpec, impedance_to_reflection, reflection_to_impedance,
                       s11_transmission_line)
from zleak.scenarios import (ScenarioSpec, build_scenario_device, full_key_bit_ids,
                             kshare_bit_id, run_campaign)
from zleak.simulator import (SnapshotState, build_device_model,
                             masking_distinguishability_witness, synthesize_trace)
from zleak.touchstone import parse_touchstone, parse_touchstone_file
from zleak.trace import ComplexTrace, FrequencyGrid, TraceBatch, from_db_deg

CORPUS = Path(__file__).parent / "data" / "malformed_touchstone"

GRID = FrequencyGrid(1e9, 2e9, 500)
BASELINE = ComplexTrace(GRID, np.full(GRID.points, from_db_deg(-0.5, 170.0)))


def report(capsys, n, name, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {n} ({name}): {detail}"


def test_criterion_1_transmission_line_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        f = rng.uniform(0.1e9, 6e9)
        er = rng.uniform(1.0, 10.0)
        L = rng.uniform(0.001, 0.2)
        val = s11_transmission_line(f, MediumSpec(er, L))
        ref = boundary_condition_s11(f, er, L)
        worst = max(worst, abs(val - ref) / abs(ref))
    exact = (s11_transmission_line(1e9, MediumSpec(1.0, 0.05)) == 0
             and s11_transmission_line(1e9, MediumSpec(4.0, 0.0)) == 0)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and exact and dt < 5.0
    report(capsys, 1, "tl-model vs boundary oracle", ok,
           f"max rel err {worst:.2e}, degenerate cases exact={exact}, {dt:.2f}s")


def test_criterion_2_conversion_round_trip(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10000):
        s = complex(rng.uniform(-0.999, 0.999), rng.uniform(-0.999, 0.999))
        if abs(s) >= 1:
            s /= 1.001 * abs(s)
        back = impedance_to_reflection(reflection_to_impedance(s))
        worst = max(worst, abs(back - s) / max(1.0, abs(s)))
    anchors = (reflection_to_impedance(0.0) == 50.0
               and reflection_to_impedance(-1.0) == 0.0)
    open_ok = False
    try:
        reflection_to_impedance(1.0)
    except OpenCircuitError:
        open_ok = True
    ok = worst <= 1e-12 and anchors and open_ok
    report(capsys, 2, "reflection<->impedance", ok,
           f"max round-trip err {worst:.2e}, anchors={anchors}, open-circuit error={open_ok}")


def test_criterion_3_fanout_dm_peaks(capsys):
    t0 = time.perf_counter()
    spec = ScenarioSpec("fanout", traces=0, traces_per_class=600, seed=3, averaging=10)
    model = build_scenario_device(GRID, BASELINE, spec, device_seed=11,
                                  noise_sigma="paper_like")
    batch = run_campaign(model, spec)
    centers = [lb.center_hz for lb in model.signatures["fanout"].lobes]
    bws = [lb.bandwidth_hz for lb in model.signatures["fanout"].lobes]
    stamps = GRID.stamps()
    near = np.zeros(GRID.points, dtype=bool)
    for c, w in zip(centers, bws):
        near |= np.abs(stamps - c) <= 5 * w
    ratios = {}
    peaks_on_lobe = True
    for channel in ("phase_deg", "magnitude_db"):
        dm = difference_of_means(batch.with_channel(channel), "fanout")
        peaks_on_lobe &= bool(near[int(np.argmax(dm))])
        ratios[channel] = dm[near].max() / dm[~near].max()
    dt = time.perf_counter() - t0
    ok = peaks_on_lobe and all(r > 5 for r in ratios.values()) and dt < 60
    report(capsys, 3, "fan-out DM peaks", ok,
           f"peak/off-peak phase {ratios['phase_deg']:.1f}x, "
           f"magnitude {ratios['magnitude_db']:.1f}x, on-lobe={peaks_on_lobe}, {dt:.1f}s")


def test_criterion_4_dima(capsys):
    t0 = time.perf_counter()
    # (a) oracle equivalence on 50 random small batches
    rng = np.random.default_rng(99)
    exact = True
    for _ in range(50):
        n, nf = int(rng.integers(8, 30)), int(rng.integers(3, 12))
        X = rng.normal(size=(n, nf))
        pts = rng.integers(0, 256, size=n)
        keys = sorted({int(k) for k in rng.integers(0, 256, size=6)})
        meta = [{"plaintext": f"{int(p):02x}"} for p in pts]
        samples = from_db_deg(np.zeros((n, nf)), X)  # encode X as the phase channel
        batch = TraceBatch(FrequencyGrid(1e9, 2e9, nf), samples, meta)
        res = dima_attack(batch, IntermediateSelector(0), key_space=keys)
        ref_scores, ref_dom = brute_force_dima(
            batch.channel_matrix(), pts,
            lambda k, p: intermediate_value(k, p, IntermediateSelector(0)), keys)
        exact &= np.allclose(res.dom_matrix, ref_dom, atol=1e-10)
        exact &= np.allclose([dict(res.ranking.entries)[k] for k in keys], ref_scores,
                             atol=1e-10)
    # (b) scaled attack: 3000 traces, 500 stamps, 20 seeds
    wins = []
    for seed in range(20):
        spec = ScenarioSpec("sbox", traces=3000, seed=1000 + seed, key=0xB4, averaging=10)
        model = build_scenario_device(GRID, BASELINE, spec, device_seed=5,
                                      noise_sigma="paper_like")
        batch = run_campaign(model, spec)
        # peak scoring: with narrow disjoint lobes the stamp-mean score is
        # diluted by cross-bit ghost correlations (see dima_attack docs)
        res = dima_attack(batch, IntermediateSelector(0), score="max")
        wins.append(res.ranking.rank_of(0xB4) == 1)
    rate, _ = success_rate(wins)
    dt = time.perf_counter() - t0
    ok = exact and sum(wins) >= 19 and dt < 300
    report(capsys, 4, "DIMA", ok,
           f"oracle exact={exact}, {sum(wins)}/20 seeds rank 1, {dt:.1f}s")


def test_criterion_5_cima(capsys):
    leak = 200
    # noiseless: |corr| = 1 at the leak stamp for the true key
    spec = ScenarioSpec("sbox_hw", traces=256, seed=2, key=0x3C, leak_stamp_index=leak)
    model = build_scenario_device(GRID, BASELINE, spec, noise_sigma="clean")
    res = cima_attack(run_campaign(model, spec))
    corr_at_leak = abs(res.corr_matrix[0x3C, leak])
    unit = abs(corr_at_leak - 1.0) <= 1e-9
    # noisy: 1200 traces, 20 seeds
    wins, peaks_exact = [], True
    for seed in range(20):
        spec = ScenarioSpec("sbox_hw", traces=1200, seed=4000 + seed, key=0x3C,
                            leak_stamp_index=leak)
        model = build_scenario_device(GRID, BASELINE, spec, noise_sigma="paper_like")
        res = cima_attack(run_campaign(model, spec))
        win = res.ranking.rank_of(0x3C) == 1
        wins.append(win)
        if win:
            peaks_exact &= res.ranking.best_frequency[0x3C] == leak
    ok = unit and sum(wins) >= 19 and peaks_exact
    report(capsys, 5, "CIMA", ok,
           f"noiseless |corr|-1 = {abs(corr_at_leak - 1.0):.1e}, "
           f"{sum(wins)}/20 seeds rank 1, peak stamp exact={peaks_exact}")


def test_criterion_6_tima_single_trace(capsys):
    t0 = time.perf_counter()
    targets = [kshare_bit_id(s, b) for s in range(3) for b in range(8)]
    wins = []
    key_ok = True
    for seed in range(20):
        prof_spec = ScenarioSpec("masked_key_byte", traces=2000, seed=6000 + seed,
                                 key=0x93, averaging=200)
        model = build_scenario_device(GRID, BASELINE, prof_spec, device_seed=13,
                                      noise_sigma="paper_like")
        prof = run_campaign(model, prof_spec)
        tset = tima_profile(prof, targets, p=5)
        atk_spec = ScenarioSpec("masked_key_byte", traces=1, seed=8000 + seed,
                                key=0x93, averaging=200)
        atk = run_campaign(model, atk_spec)
        post = tima_attack(tset, atk)
        truth = {kshare_bit_id(s, b): (int(atk.metadata[0]["shares"][s], 16) >> b) & 1
                 for s in range(3) for b in range(8)}
        all_bits = all(post.bits[bid].decided == truth[bid] for bid in targets)
        wins.append(all_bits)
        if all_bits:
            rec = recover_master_key(post)
            key_ok &= rec.key_bytes[0] == 0x93
    # worked recombination example: shares 0xC6, 0x30, 0x65 -> key 0x93
    decisions = {kshare_bit_id(s, b): (v >> b) & 1
                 for s, v in enumerate((0xC6, 0x30, 0x65)) for b in range(8)}
    worked = recover_master_key(decisions)
    worked_ok = (worked.share_bytes[0] == [0xC6, 0x30, 0x65]
                 and worked.key_bytes[0] == 0x93)
    dt = time.perf_counter() - t0
    ok = sum(wins) >= 19 and key_ok and worked_ok and dt < 600
    report(capsys, 6, "TIMA single-trace", ok,
           f"{sum(wins)}/20 seeds all 24 bits, key=0x93 ok={key_ok}, "
           f"0xC6^0x30^0x65->0x93={worked_ok}, {dt:.1f}s")


def test_criterion_7_tima_full_key_witnesses(capsys):
    t0 = time.perf_counter()
    grid = FrequencyGrid(1e9, 2e9, 1000)
    baseline = ComplexTrace(grid, np.full(grid.points, from_db_deg(-0.5, 170.0)))
    spec = ScenarioSpec("masked_full_key", traces=10000, seed=12, key=list(range(16)),
                        n_target_bits=64, averaging=10)
    model = build_scenario_device(grid, baseline, spec, device_seed=17,
                                  noise_sigma="paper_like")
    batch = run_campaign(model, spec)
    bits = full_key_bit_ids(64)
    argmaxes = [int(np.argmax(difference_of_means(batch, b))) for b in bits]
    n_pairs = len(bits) * (len(bits) - 1) // 2
    distinct = sum(1 for i in range(len(bits)) for j in range(i + 1, len(bits))
                   if argmaxes[i] != argmaxes[j])
    frac = distinct / n_pairs
    dt = time.perf_counter() - t0
    ok = frac >= 0.95
    report(capsys, 7, "full-key witness separation", ok,
           f"{frac:.1%} of {n_pairs} bit pairs have distinct DM argmax, {dt:.1f}s")


def test_criterion_8_witness_property(capsys):
    all_positive = True
    checked = 0
    for device_seed in range(5):
        for n_bits in (4, 8, 24):
            model = build_device_model(GRID, BASELINE, [f"b{i}" for i in range(n_bits)],
                                       seed=device_seed, noise_sigma="clean")
            for bit in model.bit_ids():
                _, delta = masking_distinguishability_witness(model, bit)
                all_positive &= delta > 0
                checked += 1
    # a zero-signature bit must error
    from zleak.simulator import BitSignature, DeviceModel, Lobe
    model = build_device_model(GRID, BASELINE, ["b0"], noise_sigma="clean")
    null = {"b0": BitSignature("b0", (Lobe(1.5e9, 1e6, 0.0, 0.0),))}
    errored = False
    try:
        masking_distinguishability_witness(
            DeviceModel(GRID, BASELINE, null, 0.0, 0), "b0")
    except NoWitnessError:
        errored = True
    ok = all_positive and errored
    report(capsys, 8, "distinguishability witness", ok,
           f"{checked} bits all with positive deflection, null-signature errors={errored}")


def test_criterion_9_statistical_laws(capsys):
    # (a) averaging variance law within 15% at 1000 repeats
    sigma, m = 0.05, 8
    model = build_device_model(GRID, BASELINE, ["b0"], noise_sigma=sigma)
    vals = np.array([synthesize_trace(model, SnapshotState({}), noise_seed=s,
                                      averaging=m).samples[250] for s in range(1000)])
    var = vals.real.var(ddof=1) + vals.imag.var(ddof=1)
    expect = 2 * sigma**2 / m
    var_ok = abs(var - expect) <= 0.15 * expect
    # (b) share-split marginal uniformity, chi-square at 99%
    n = 3000
    counts = np.zeros((3, 256))
    for seed in range(n):
        for si, s in enumerate(share_split(0x93, 2, seed).shares):
            counts[si, s] += 1
    bound = chi2.ppf(0.99, 255)
    stats = ((counts - n / 256) ** 2 / (n / 256)).sum(axis=1)
    chi_ok = bool(np.all(stats < bound))
    # (c) permutation control: shuffled labels give uniform key ranks (KS, 1%)
    grid = FrequencyGrid(1e9, 2e9, 100)
    baseline = ComplexTrace(grid, np.full(100, from_db_deg(-0.5, 170.0)))
    ranks = []
    for seed in range(100):
        spec = ScenarioSpec("sbox", traces=300, seed=20000 + seed, key=0x5A)
        mdl = build_scenario_device(grid, baseline, spec, device_seed=seed,
                                    noise_sigma="paper_like")
        batch = run_campaign(mdl, spec)
        rng = np.random.default_rng(seed)
        meta = [dict(m) for m in batch.metadata]
        pts = [m["plaintext"] for m in meta]
        rng.shuffle(pts)
        for m_i, p in zip(meta, pts):
            m_i["plaintext"] = p
        shuffled = TraceBatch(batch.grid, batch.samples, meta, batch.channel)
        res = cima_attack(shuffled)
        ranks.append(res.ranking.rank_of(0x5A))
    ks = kstest((np.array(ranks) - 0.5) / 256, "uniform")
    ks_ok = ks.pvalue > 0.01
    ok = var_ok and chi_ok and ks_ok
    report(capsys, 9, "statistical laws", ok,
           f"variance ratio {var / expect:.3f}, chi2 max {stats.max():.0f} < {bound:.0f}: "
           f"{chi_ok}, permutation KS p={ks.pvalue:.3f}")


def test_criterion_10_parser_formats(capsys, tmp_path):
    # archive round trip, bit exact
    rng = np.random.default_rng(5)
    samples = rng.normal(size=(10, GRID.points)) + 1j * rng.normal(size=(10, GRID.points))
    batch = TraceBatch(GRID, samples, [{"plaintext": f"{i:02x}"} for i in range(10)])
    p = tmp_path / "b.zarc"
    write_archive(batch, p)
    back = read_archive(p)
    arch_ok = (np.array_equal(back.samples, batch.samples)
               and back.metadata == batch.metadata)
    # three formats agree within 1e-6
    vals = [0.5 + 0.25j, -0.125 + 0.6j, 0.01 - 0.99j]
    freqs = [1.0, 1.5, 2.0]
    texts = {
        "RI": "# GHz S RI R 50\n" + "".join(
            f"{f} {v.real:.12g} {v.imag:.12g}\n" for f, v in zip(freqs, vals)),
        "MA": "# GHz S MA R 50\n" + "".join(
            f"{f} {abs(v):.12g} {np.degrees(np.angle(v)):.12g}\n"
            for f, v in zip(freqs, vals)),
        "DB": "# GHz S DB R 50\n" + "".join(
            f"{f} {20 * np.log10(abs(v)):.12g} {np.degrees(np.angle(v)):.12g}\n"
            for f, v in zip(freqs, vals)),
    }
    parsed = {k: parse_touchstone(t).samples for k, t in texts.items()}
    fmt_ok = (np.allclose(parsed["MA"], parsed["RI"], atol=1e-6)
              and np.allclose(parsed["DB"], parsed["RI"], atol=1e-6))
    # malformed corpus: every file rejected with the declared error class
    import zleak.errors as zerrors
    manifest = json.loads((CORPUS / "manifest.json").read_text())
    rejected = 0
    for fixture, err_name in manifest.items():
        try:
            parse_touchstone_file(CORPUS / fixture)
        except zerrors.TouchstoneError as exc:
            if type(exc).__name__ == err_name:
                rejected += 1
    corpus_ok = rejected == len(manifest) and len(manifest) >= 20
    ok = arch_ok and fmt_ok and corpus_ok
    report(capsys, 10, "parser/formats", ok,
           f"archive bit-exact={arch_ok}, RI/MA/DB agree={fmt_ok}, "
           f"{rejected}/{len(manifest)} malformed files rejected correctly")
