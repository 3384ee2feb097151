"""FastAPI service wrapping the optimization toolkit.

Run it with ``uvicorn robopt.service:app``.  The CLI talks to the same app
in-process by default, so both surfaces share one code path.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import data_synth, losses, optimizers, privacy, scenarios
from .schemas import (
    ConstraintModel,
    DatasetPayload,
    GradSourceModel,
    LossModelSpec,
    PrivacyRequest,
    PrivacyResponse,
    RunRequest,
    RunResponse,
    ScenarioRunRequest,
    ScenarioRunResponse,
    ScenarioSummary,
    SynthRequest,
    SynthResponse,
)


def _build_cov(model: SynthRequest) -> data_synth.CovSpec:
    c = model.cov
    return data_synth.CovSpec(kind=c.kind, values=None if c.values is None else tuple(c.values), m=c.m, half_width=c.half_width)


def _build_dataset(req: SynthRequest) -> data_synth.Dataset:
    theta = np.ones(req.p) if req.theta_star is None else np.asarray(req.theta_star, dtype=float)
    if req.model == "separable":
        return data_synth.gen_separable(req.n, req.p, req.seed)
    if req.model == "glm-logistic":
        a = req.a if req.a is not None else 1.0 / np.sqrt(req.p)
        return data_synth.gen_logistic_glm(req.n, req.p, theta, a, req.seed)
    noise = data_synth.NoiseSpec(kind=req.noise.kind, sigma2=req.noise.sigma2, nu=req.noise.nu, bound=req.noise.bound)
    return data_synth.gen_linear_heavy_tailed(req.n, req.p, theta, _build_cov(req), noise, req.seed)


def _dataset_from_payload(payload: DatasetPayload) -> data_synth.Dataset:
    theta = None if payload.theta_star is None else np.asarray(payload.theta_star, dtype=float)
    return data_synth.Dataset(
        np.asarray(payload.X, dtype=float),
        np.asarray(payload.y, dtype=float),
        theta,
        payload.model_tag,
        payload.seed,
    )


def _loss_model(spec: LossModelSpec) -> losses.LossModel:
    bounds = None
    if spec.L_x is not None:
        bounds = losses.DomainBounds(L_x=spec.L_x, K_y=spec.K_y if spec.K_y is not None else float("inf"))
    return losses.LossModel(spec.family, gamma=spec.gamma, q=spec.q, domain_bounds=bounds)


def _constraint(spec: ConstraintModel):
    if spec.kind == "l2-ball":
        if spec.radius is None:
            raise ValueError("l2-ball constraint needs a radius")
        return optimizers.L2Ball(spec.radius)
    return optimizers.AllSpace()


def _grad_source(spec: GradSourceModel):
    if spec.kind == "exact-mean":
        return optimizers.ExactMean()
    if spec.kind == "noised-mean":
        return optimizers.NoisedMean(epsilon=spec.epsilon, delta=spec.delta, L2=spec.L2, sigma2=spec.sigma2)
    if spec.zeta is None:
        raise ValueError("gmom gradient source needs zeta")
    return optimizers.GmomEstimator(zeta=spec.zeta, split_zeta=spec.split_zeta, chunked=spec.chunked)


def _execute_run(req: RunRequest) -> optimizers.Trajectory:
    dataset = _dataset_from_payload(req.dataset)
    model = _loss_model(req.model)
    constraint = _constraint(req.constraint)
    source = _grad_source(req.source)
    cfg = req.config
    if cfg.algorithm == "dp-sgd":
        if cfg.epsilon is None or cfg.delta is None:
            raise ValueError("dp-sgd needs epsilon and delta")
        if not isinstance(constraint, optimizers.L2Ball):
            raise ValueError("dp-sgd requires an l2-ball constraint")
        return optimizers.run_dp_sgd(
            dataset,
            model,
            constraint,
            cfg.epsilon,
            cfg.delta,
            cfg.seed,
            max_n=cfg.max_n,
            reference_value=req.reference_value,
        )
    if cfg.T is None:
        raise ValueError(f"{cfg.algorithm} needs an iteration count T")
    theta0 = np.zeros(dataset.p) if cfg.theta0 is None else np.asarray(cfg.theta0, dtype=float)
    theta1 = None if cfg.theta1 is None else np.asarray(cfg.theta1, dtype=float)
    config = optimizers.OptimizerConfig(
        algorithm=cfg.algorithm,
        T=cfg.T,
        theta0=theta0,
        theta1=theta1,
        eta=cfg.eta,
        lam=cfg.lam,
        r=cfg.r,
        tau_u=cfg.tau_u,
        tau_l=cfg.tau_l,
        seed=cfg.seed,
    )
    if cfg.algorithm in ("pgd",):
        return optimizers.run_pgd(dataset, model, constraint, config, source, reference_value=req.reference_value)
    if cfg.algorithm in ("nesterov-sc", "nesterov-smooth"):
        if not isinstance(constraint, optimizers.AllSpace):
            raise ValueError("momentum runs are unconstrained; use the all-space constraint")
        return optimizers.run_nesterov(dataset, model, config, source, reference_value=req.reference_value)
    return optimizers.run_fw(dataset, model, constraint, config, source, reference_value=req.reference_value)


def create_app() -> FastAPI:
    app = FastAPI(title="robopt", version="0.1.0")

    @app.exception_handler(ValueError)
    async def _value_error(_: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _key_error(_: Request, exc: KeyError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(scenarios.ScenarioCellError)
    async def _cell_error(_: Request, exc: scenarios.ScenarioCellError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest):
        dataset = _build_dataset(req)
        return SynthResponse(csv=data_synth.dataset_to_csv(dataset), sidecar=data_synth.dataset_sidecar(dataset))

    @app.post("/privacy", response_model=PrivacyResponse)
    def privacy_route(req: PrivacyRequest):
        sigma2 = privacy.fw_noise_variance(req.L2, req.n, req.T, req.epsilon, req.delta, req.variant)
        ok = privacy.adv_ok(req.epsilon, req.delta, req.T)
        eps_step = delta_step = None
        if ok:
            eps_step, delta_step = privacy.per_step_budget(req.epsilon, req.delta, req.T)
        return PrivacyResponse(
            sigma2=sigma2,
            eps_step=eps_step,
            delta_step=delta_step,
            eps_small=req.epsilon <= 0.9,
            adv_ok=ok,
            sensitivity=privacy.gradient_mean_sensitivity(req.L2, req.n),
        )

    @app.post("/run", response_model=RunResponse)
    def run_route(req: RunRequest):
        traj = _execute_run(req)
        return RunResponse(
            csv=traj.to_csv(),
            algorithm=traj.algorithm,
            T=len(traj.iterates) - 1,
            final_loss=traj.final_loss,
            final_excess_loss=traj.final_excess,
            final_l2_error=traj.final_l2_error,
            noise_sigma2=traj.noise_sigma2,
            noise_draws=traj.noise_draws,
        )

    @app.get("/scenarios", response_model=list[ScenarioSummary])
    def catalog():
        return [
            ScenarioSummary(
                id=s.id,
                description=s.description,
                n_grid=list(s.n_grid),
                p=s.p,
                epsilons=list(s.epsilons),
                delta=s.delta,
                zeta=s.zeta,
                algorithms=list(s.algorithms),
                seeds=list(s.seeds),
                default_scale=s.default_scale,
            )
            for s in scenarios.scenario_catalog()
        ]

    @app.post("/scenarios/run", response_model=ScenarioRunResponse)
    def run_scenario_route(req: ScenarioRunRequest):
        spec = scenarios.get_scenario(req.id)
        if req.seeds:
            spec = spec.with_seeds(req.seeds)
        table = scenarios.run_scenario(spec, scale=req.scale, parallel_width=req.parallel_width)
        meta = dict(table.meta)
        meta["n_grid"] = list(meta.get("n_grid", ()))
        meta["seeds"] = list(meta.get("seeds", ()))
        return ScenarioRunResponse(csv=scenarios.table_to_csv(table), rows=len(table.rows), meta=meta)

    return app


app = create_app()
