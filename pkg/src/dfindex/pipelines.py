"""Domain-level pipelines wiring the zoo fixtures through the analysis
modules; the CLI and the acceptance suite both drive these."""

from __future__ import annotations

import numpy as np

from .certify import (CriterionEvaluator, IndexCertificate, ZeroPsi,
                      boundary_criterion, curve_psi_from_report,
                      delta_exp_psi_jet_fn, estimate_index,
                      interior_psh_oracle, oracle_jet_fn_from_rho,
                      real_curve_certify, ChartBasisPsi, coordinate_descent)
from .cohomology import (CollarMap, PathInSigma, ThetaSource, build_potential,
                         classify, exactness_tolerance, extend_to_collar,
                         period)
from .errors import NotACurve, ObstructedClass
from .levi import detect_sigma
from .zoo import ZooEntry


def sigma_scan(entry: ZooEntry, mesh_count=2000, seed=0, threshold=None):
    mesh = entry.boundary_mesh(mesh_count, seed)
    return detect_sigma(entry.domain, mesh, threshold=threshold)


def periods_for(entry: ZooEntry, tol=None):
    """Period of every generator loop; (verdict, periods dict)."""
    values = {}
    max_theta = 0.0
    diam = 0.0
    for name, (chart_name, params, closed) in entry.loops.items():
        chart = entry.charts[chart_name]
        src = ThetaSource(chart)
        loop = PathInSigma(params, closed=closed, chart_name=chart_name)
        values[name] = period(src, loop)
        comps = src.components(params)
        max_theta = max(max_theta, float(np.max(np.abs(comps))))
        diam = max(diam, float(np.max(chart.hi - chart.lo)))
    if tol is None:
        tol = exactness_tolerance(max_theta, max(diam, 1.0))
    return classify(values, tol), values


def potential_for(entry: ZooEntry, verdict=None, res=9, check_targets=20):
    """Potential field over the entry's charts (foliations: all leaves)."""
    if verdict is None:
        verdict, _ = periods_for(entry)
    charts = [c for c in entry.charts.values()
              if c.kind == "complex"] or list(entry.charts.values())
    if entry.id == "worm":
        charts = [entry.charts["log_polar"]]
    sources = [ThetaSource(c) for c in charts]
    base = np.zeros(charts[0].params_dim)
    base = 0.5 * (charts[0].lo + charts[0].hi)
    return build_potential(sources, base, verdict, res=res,
                           check_targets=check_targets)


def collar_psi_for(entry: ZooEntry, phi):
    collar = CollarMap(to_chart=entry.sigma_coords)
    return extend_to_collar(entry.domain, phi, collar)


def default_psi_for(entry: ZooEntry, res=9):
    """The pipeline's default candidate: the collar potential when the
    period verdict is Exact, otherwise zero; returns (psi, provenance,
    verdict)."""
    dom = entry.domain
    verdict = periods_for(entry)[0] if entry.loops else classify({}, 1e-6)
    if entry.sigma_kind == "Empty":
        return ZeroPsi(dom), "zero (empty degenerate set)", verdict
    if verdict.exact and entry.charts and entry.sigma_coords is not None \
            and entry.sigma_kind in ("Foliation", "ComplexSubmanifold"):
        phi = potential_for(entry, verdict, res=res)
        return collar_psi_for(entry, phi), "collar potential (-2 phi)", verdict
    return ZeroPsi(dom), "zero (no exact potential)", verdict


def certify_domain(entry: ZooEntry, eta, mesh_count=2000, seed=0,
                   oracle_count=800, slack=None, oracle_slack=1e-6,
                   oracle_depth=(0.04, 0.12)):
    """Full certification pipeline at one exponent.

    Returns a dict report with the criterion, oracle, and verdict pieces;
    'certified' is True only when both checks pass.
    """
    dom = entry.domain
    sigma = sigma_scan(entry, mesh_count, seed)
    out = {"domain": entry.id, "eta": float(eta), "sigmaSize": sigma.size}
    if entry.sigma_kind == "RealCurve":
        crep = real_curve_certify(dom, entry.charts.get("curve"), eta)
        out["curve"] = crep.to_json()
        psi = curve_psi_from_report(dom, entry.charts["curve"], crep,
                                    entry.sigma_distance)
        provenance = "curve certificate profile"
        boundary_ok = crep.certified
        out["criterion"] = {"certified": crep.certified,
                            "maxLHS": crep.max_lhs, "slack": crep.slack}
    else:
        psi, provenance, verdict = default_psi_for(entry)
        out["verdict"] = verdict.to_json()
        rep = boundary_criterion(dom, sigma, psi, eta, slack=slack,
                                 psi_name=provenance)
        out["criterion"] = rep.to_json()
        boundary_ok = rep.certified
        if not verdict.exact:
            out["obstruction"] = {
                "classification": "Obstructed",
                "periods": verdict.to_json()["periods"],
            }
    mesh = entry.interior_mesh(oracle_count, seed + 1, depth=oracle_depth)
    orep = interior_psh_oracle(delta_exp_psi_jet_fn(dom, psi), eta, mesh,
                               slack_rel=oracle_slack)
    out["oracle"] = orep.to_json()
    out["psi"] = provenance
    out["certified"] = bool(boundary_ok and orep.certified)
    return out


def _family_basis(entry: ZooEntry):
    """Fourier x polynomial surface basis on the entry's Sigma coordinates."""
    if entry.id == "worm":
        terms = [
            lambda U: U[:, 0],
            lambda U: U[:, 0] ** 2,
            lambda U: np.cos(U[:, 1]),
            lambda U: np.sin(U[:, 1]),
            lambda U: np.cos(2 * U[:, 1]),
            lambda U: np.sin(2 * U[:, 1]),
            lambda U: U[:, 0] * np.cos(U[:, 1]),
            lambda U: U[:, 0] * np.sin(U[:, 1]),
        ]
    else:
        terms = [
            lambda U: U[:, 0],
            lambda U: U[:, 0] ** 2,
            lambda U: U[:, 1] if U.shape[1] > 1 else U[:, 0] ** 3,
            lambda U: (U[:, 1] ** 2 if U.shape[1] > 1 else U[:, 0] ** 4),
        ]
    return terms


def estimate_domain(entry: ZooEntry, eta_grid=None, mesh_count=2000, seed=0,
                    oracle_count=800, slack=None, oracle_slack=1e-6,
                    oracle_depth=(0.04, 0.12),
                    family_box=1.0) -> IndexCertificate:
    """estimate pipeline: search psi candidates per eta ascending."""
    from .certify import DEFAULT_ETA_GRID

    dom = entry.domain
    eta_grid = DEFAULT_ETA_GRID if eta_grid is None else eta_grid
    sigma = sigma_scan(entry, mesh_count, seed)
    diagnostics = {"sigmaSize": sigma.size, "psiProvenance": []}

    if entry.sigma_kind == "RealCurve":
        records = []
        bound = 0.0
        for eta in sorted(eta_grid):
            crep = real_curve_certify(dom, entry.charts["curve"], eta)
            psi = curve_psi_from_report(dom, entry.charts["curve"], crep,
                                        entry.sigma_distance)
            mesh = entry.interior_mesh(oracle_count, seed + 1,
                                       depth=oracle_depth)
            orep = interior_psh_oracle(delta_exp_psi_jet_fn(dom, psi), eta,
                                       mesh, slack_rel=oracle_slack)
            ok = crep.certified and orep.certified
            records.append({"eta": float(eta), "certified": bool(ok),
                            "psi": "curve certificate",
                            "maxLHS": crep.max_lhs,
                            "oracleMinEig": orep.min_eig})
            if ok:
                bound = max(bound, float(eta))
        return IndexCertificate(eta_grid=list(sorted(eta_grid)),
                                records=records, bound=bound,
                                certified_any=bound > 0,
                                diagnostics=diagnostics)

    base_psi = []
    verdict = None
    if entry.loops:
        verdict, _ = periods_for(entry)
        diagnostics["verdict"] = verdict.to_json()
        if verdict.exact and entry.sigma_coords is not None:
            phi = potential_for(entry, verdict)
            base_psi.append(("collar potential", collar_psi_for(entry, phi)))
    if not verdict or not verdict.exact:
        if verdict is not None:
            diagnostics["obstruction"] = verdict.to_json()

    def candidates(eta):
        for item in base_psi:
            yield item
        yield "zero", ZeroPsi(dom)
        if entry.sigma_coords is not None and sigma.size and not base_psi:
            terms = _family_basis(entry)
            ev = CriterionEvaluator(dom, sigma)
            proto = ChartBasisPsi(dom,
                                  lambda P: entry.sigma_coords(P),
                                  terms, np.zeros(len(terms)))

            def objective(coef):
                return float(ev.lhs(proto.with_coef(coef), eta).max())

            lo = -family_box * np.ones(len(terms))
            hi = family_box * np.ones(len(terms))
            coef, val = coordinate_descent(objective, np.zeros(len(terms)),
                                           lo, hi, rounds=2, gold_iters=10)
            diagnostics["psiProvenance"].append(
                {"eta": float(eta), "family_min_maxLHS": float(val)})
            yield "family (coordinate descent)", proto.with_coef(coef)

    def oracle_fn(eta, psi):
        mesh = entry.interior_mesh(oracle_count, seed + 1, depth=oracle_depth)
        return interior_psh_oracle(delta_exp_psi_jet_fn(dom, psi), eta, mesh,
                                   slack_rel=oracle_slack)

    return estimate_index(dom, sigma, candidates, oracle_fn,
                          eta_grid=eta_grid, slack=slack,
                          diagnostics=diagnostics)
