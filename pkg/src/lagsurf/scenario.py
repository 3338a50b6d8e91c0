"""Scenario configuration, built-in registries and the experiment driver.

A scenario is a declarative YAML document: geometry bodies, smoothing length
(constant or a named spatial profile), a velocity law, an optional PDE block,
time stepping, adaptation/contact switches and output cadence.  Velocity
laws, forcings, initial fields, h profiles and analytic references are
registry ids so configs stay free of expression parsing.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from . import adaptation, contact as contact_mod, motion
from .geometry import recompute_frames
from .operators import build_stencils_robust, surface_divergence
from .point_cloud import PointCloud, generate_surface, read_cloud
from .solvers import adr_step, wave_step, mcf_velocity

log = logging.getLogger(__name__)

SQRT6 = math.sqrt(6.0)


class ConfigError(Exception):
    pass


# ------------------------------------------------------------- registries

def _expansion_radius(t):
    return 1.0 + 0.5 * t


VELOCITY_LAWS = {}
FORCINGS = {}
WAVE_FORCINGS = {}
INITIAL_FIELDS = {}
H_FIELDS = {}
REFERENCES = {}


def _register(registry, name):
    def deco(fn):
        registry[name] = fn
        return fn
    return deco


@_register(VELOCITY_LAWS, "zero")
def _v_zero(cloud, t, params):
    return np.zeros_like(cloud.positions)


@_register(VELOCITY_LAWS, "rotation_quarter")
def _v_rot(cloud, t, params):
    x, y, z = cloud.positions.T
    return np.stack([y, -x + z, -y], axis=1)


@_register(VELOCITY_LAWS, "hemisphere_stretch")
def _v_stretch(cloud, t, params):
    z = cloud.positions[:, 2]
    vx = 2 * np.pi * np.cos(2 * np.pi * t) * np.sin(0.5 * np.pi * z)
    return np.stack([vx, np.zeros_like(vx), np.zeros_like(vx)], axis=1)


@_register(VELOCITY_LAWS, "radial")
def _v_radial(cloud, t, params):
    speed = params.get("speed", 0.5)
    r = np.linalg.norm(cloud.positions, axis=1, keepdims=True)
    return speed * cloud.positions / np.maximum(r, 1e-300)


@_register(VELOCITY_LAWS, "normal_speed")
def _v_normal(cloud, t, params):
    return params.get("speed", 0.5) * cloud.normal


@_register(VELOCITY_LAWS, "approach_x")
def _v_approach(cloud, t, params):
    speed = params.get("speed", 0.5)
    vx = -np.sign(cloud.positions[:, 0]) * speed
    return np.stack([vx, np.zeros_like(vx), np.zeros_like(vx)], axis=1)


@_register(VELOCITY_LAWS, "half_pipe_twist")
def _v_half_pipe(cloud, t, params):
    x, y, z = cloud.positions.T
    phi = cloud.fields.get("phi", np.zeros(cloud.n_points))
    twist = np.stack([-y * z, np.zeros_like(x), x * z], axis=1)
    return 0.5 * phi[:, None] * cloud.normal + twist


@_register(FORCINGS, "zero")
def _f_zero(cloud, t):
    return None, None


@_register(FORCINGS, "expanding_sphere_adr")
def _f_sphere_adr(cloud, t):
    # reaction keeping exp(-6t)*x*y exact on the radially expanding sphere
    r = _expansion_radius(t)
    a = -6.0 + 2.0 / r + 6.0 / r ** 2
    return np.full(cloud.n_points, a), None


@_register(WAVE_FORCINGS, "zero")
def _wf_zero(cloud, t):
    return np.zeros(cloud.n_points)


@_register(WAVE_FORCINGS, "expanding_sphere_wave")
def _wf_sphere(cloud, t):
    r = _expansion_radius(t)
    x, y = cloud.positions[:, 0], cloud.positions[:, 1]
    s, c = math.sin(SQRT6 * t), math.cos(SQRT6 * t)
    return x * y * (-6.0 * s + 3.0 * SQRT6 * c / r + 7.5 * s / r ** 2)


@_register(INITIAL_FIELDS, "zero")
def _u_zero(cloud):
    return np.zeros(cloud.n_points)


@_register(INITIAL_FIELDS, "xy")
def _u_xy(cloud):
    return cloud.positions[:, 0] * cloud.positions[:, 1]


@_register(INITIAL_FIELDS, "sqrt6_xy")
def _u_s6xy(cloud):
    return SQRT6 * cloud.positions[:, 0] * cloud.positions[:, 1]


@_register(INITIAL_FIELDS, "half_pipe_hotspots")
def _u_hotspots(cloud):
    # two hot caps near the quarter positions of the arc
    arc = 0.75
    spots = [np.array([arc * math.cos(a), 0.0, arc * math.sin(a)]) for a in (-np.pi / 4, np.pi / 4)]
    phi = np.zeros(cloud.n_points)
    for s in spots:
        phi[np.linalg.norm(cloud.positions - s, axis=1) < 0.3] = 1.0
    return phi


@_register(H_FIELDS, "constant")
def _h_const(positions, t, params):
    return np.full(len(positions), params["h"])


@_register(H_FIELDS, "band_x")
def _h_band(positions, t, params):
    """Refined band around the plane x=0: h_fine inside |x|<w0, ramping
    linearly to h_coarse beyond w1."""
    h0, h1 = params["h_fine"], params["h_coarse"]
    w0, w1 = params.get("w0", 0.3), params.get("w1", 0.6)
    ax = np.abs(positions[:, 0])
    frac = np.clip((ax - w0) / max(w1 - w0, 1e-12), 0.0, 1.0)
    return h0 + (h1 - h0) * frac


@_register(REFERENCES, "expanding_sphere_adr")
def _ref_adr(cloud, t):
    x, y = cloud.positions[:, 0], cloud.positions[:, 1]
    ex = math.exp(-6.0 * t) * x * y
    num = np.linalg.norm(cloud.fields["phi"] - ex)
    den = np.linalg.norm(ex)
    return num / den if den > 0 else num


@_register(REFERENCES, "expanding_sphere_wave")
def _ref_wave(cloud, t):
    x, y = cloud.positions[:, 0], cloud.positions[:, 1]
    ex = math.sin(SQRT6 * t) * x * y
    num = np.linalg.norm(cloud.fields["phi"] - ex)
    den = np.linalg.norm(ex)
    return num / den if den > 0 else num


@_register(REFERENCES, "unit_sphere_dist")
def _ref_sphere_dist(cloud, t):
    return float(np.mean(np.abs(np.linalg.norm(cloud.positions, axis=1) - 1.0)))


@_register(REFERENCES, "unit_sphere_sq")
def _ref_sphere_sq(cloud, t):
    return float(np.mean(np.abs(np.sum(cloud.positions ** 2, axis=1) - 1.0)))


@_register(REFERENCES, "torus_sq")
def _ref_torus_sq(cloud, t, c=3.0, a=1.0):
    x, y, z = cloud.positions.T
    val = (c - np.sqrt(x * x + y * y)) ** 2 + z * z - a * a
    return float(np.mean(np.abs(val)))


# ------------------------------------------------------------ config model

@dataclass
class BodyConfig:
    kind: str
    params: dict = field(default_factory=dict)
    chamber: int = 0
    path: str = ""          # for kind == "file"


@dataclass
class ContactConfig:
    policy: str = "none"    # none | non_penetration | delete | merge
    self_contact: bool = False


@dataclass
class OutputConfig:
    directory: str = "out"
    cadence: int = 0        # steps between frames; 0 disables frames
    vtk: bool = False
    logs: bool = True
    fields: tuple = ()


@dataclass
class ScenarioConfig:
    name: str
    bodies: list
    h: float = 0.1
    h_field: dict | None = None          # {"id": ..., "params": {...}}
    velocity: dict = field(default_factory=lambda: {"law": "zero", "params": {}})
    pde: dict = field(default_factory=lambda: {"type": "none"})
    dt: float = 0.01
    t_end: float = 1.0
    movement_order: int = 2
    adaptation: bool = True
    contact: ContactConfig = field(default_factory=ContactConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    reference: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end < self.dt:
            raise ConfigError("t_end must be at least dt")
        if isinstance(self.contact, dict):
            self.contact = ContactConfig(**self.contact)
        if isinstance(self.output, dict):
            self.output = OutputConfig(**{k: (tuple(v) if k == "fields" else v)
                                          for k, v in self.output.items()})
        self.bodies = [BodyConfig(**b) if isinstance(b, dict) else b for b in self.bodies]
        law = self.velocity.get("law")
        if self.pde.get("type") not in ("mcf",) and law not in VELOCITY_LAWS:
            raise ConfigError(f"unknown velocity law {law!r}")
        if self.h_field is not None and self.h_field.get("id") not in H_FIELDS:
            raise ConfigError(f"unknown h field {self.h_field.get('id')!r}")
        if self.reference is not None and self.reference not in REFERENCES:
            raise ConfigError(f"unknown reference {self.reference!r}")
        ptype = self.pde.get("type", "none")
        if ptype not in ("none", "adr", "wave", "mcf"):
            raise ConfigError(f"unknown pde type {ptype!r}")
        if ptype == "adr" and self.pde.get("forcing", "zero") not in FORCINGS:
            raise ConfigError(f"unknown adr forcing {self.pde.get('forcing')!r}")
        if ptype == "wave" and self.pde.get("forcing", "zero") not in WAVE_FORCINGS:
            raise ConfigError(f"unknown wave forcing {self.pde.get('forcing')!r}")

    def to_dict(self):
        d = asdict(self)
        d["output"]["fields"] = list(d["output"]["fields"])
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    def save(self, path):
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            data = yaml.safe_load(f)
        if not isinstance(data, dict) or "name" not in data or "bodies" not in data:
            raise ConfigError(f"{path}: not a scenario config (need name/bodies)")
        return cls.from_dict(data)


# --------------------------------------------------------------- assembly

def _build_dumbbell(h, seed):
    """Two unit spheres 4 apart joined by a radius-0.2 cylinder."""
    from .point_cloud import DENSITY, _dart_seeded, PointCloud

    rng = np.random.default_rng(seed)
    neck_r = 0.2
    xc = math.sqrt(1.0 - neck_r ** 2)  # cap cut where the cylinder meets
    cyl_half = 2.0 - xc

    def sample(m, rng):
        # areas: two cut spheres + cylinder
        cap_area = 2 * np.pi * (1 - xc)
        sph_area = 4 * np.pi - 2 * np.pi * (1 - xc)
        cyl_area = 2 * np.pi * neck_r * 2 * cyl_half
        total = 2 * sph_area + cyl_area
        u = rng.random(m)
        pts = np.empty((m, 3))
        for k in range(m):
            if u[k] < 2 * sph_area / total:
                center = -2.0 if u[k] < sph_area / total else 2.0
                while True:
                    v = rng.normal(size=3)
                    v /= np.linalg.norm(v)
                    if center < 0 and v[0] < xc:
                        break
                    if center > 0 and v[0] > -xc:
                        break
                pts[k] = v
                pts[k, 0] += center
            else:
                th = rng.uniform(0, 2 * np.pi)
                xx = rng.uniform(-cyl_half, cyl_half)
                pts[k] = (xx, neck_r * math.cos(th), neck_r * math.sin(th))
        return pts

    cap_area = 2 * np.pi * (1 - xc)
    area = 2 * (4 * np.pi - cap_area) + 2 * np.pi * neck_r * 2 * cyl_half
    target = int(round(DENSITY * area / h ** 2))
    pts = _dart_seeded(sample, np.empty((0, 3)), target, 0.33 * h, rng)
    cloud = PointCloud(pts, h)
    n = np.empty_like(pts)
    on_cyl = np.abs(pts[:, 0]) <= cyl_half + 1e-9
    rad = pts[:, 1:]
    nn = np.linalg.norm(rad, axis=1, keepdims=True)
    n[on_cyl, 0] = 0.0
    n[on_cyl, 1:] = rad[on_cyl] / np.maximum(nn[on_cyl], 1e-300)
    for sgn in (-1.0, 1.0):
        on_s = (~on_cyl) & (np.sign(pts[:, 0]) == sgn)
        d = pts[on_s] - np.array([2.0 * sgn, 0, 0])
        n[on_s] = d / np.linalg.norm(d, axis=1, keepdims=True)
    cloud.normal = n
    recompute_frames(cloud, keep_normals=True)
    return cloud


def build_cloud(config: ScenarioConfig) -> PointCloud:
    """Generate and assemble all bodies into one cloud with chamber ids."""
    parts = []
    for k, body in enumerate(config.bodies):
        if body.kind == "file":
            part = read_cloud(body.path)
        elif body.kind == "dumbbell":
            part = _build_dumbbell(config.h, config.seed + k)
        else:
            part = generate_surface(body.kind, body.params, config.h,
                                    seed=config.seed + k)
        part.chamber[:] = body.chamber
        parts.append(part)
    base = parts[0]
    for extra in parts[1:]:
        base.add_points(extra.positions, extra.h, extra.chamber, extra.boundary,
                        normal=extra.normal)
    cloud = base
    if config.h_field is not None:
        params = dict(config.h_field.get("params", {}))
        cloud.h = H_FIELDS[config.h_field["id"]](cloud.positions, 0.0, params)
    recompute_frames(cloud, keep_normals=True)
    return cloud


# ------------------------------------------------------------ run driver

@dataclass
class ScenarioResult:
    cloud: PointCloud
    metrics: dict
    log_rows: list
    final_error: float | None = None


def connected_components(cloud: PointCloud, table=None):
    """Number of connected components of the support graph (per chamber)."""
    if table is None:
        table = cloud.neighbor_table()
    n = cloud.n_points
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    rows = np.repeat(np.arange(n), table.counts())
    for a, b in zip(rows, table.indices):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n)})


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Execute a scenario: per step, velocity evaluation, movement, merge,
    hole filling (+boundary fill), contact handling, frame/stencil rebuild,
    implicit PDE update and output emission."""
    np.random.seed(config.seed)
    cloud = build_cloud(config)
    out = config.output
    os.makedirs(out.directory, exist_ok=True)
    event_log = None
    if out.logs and config.contact.policy != "none":
        event_log = open(os.path.join(out.directory, f"{config.name}_contacts.csv"), "w")
        event_log.write("step,point,chamber,dc,classification,action\n")

    pde = dict(config.pde)
    ptype = pde.get("type", "none")
    needs_stencils = ptype in ("adr", "wave", "mcf")
    law = config.velocity.get("law", "zero")
    law_params = dict(config.velocity.get("params", {}))
    h_field = None
    if config.h_field is not None:
        hf_params = dict(config.h_field.get("params", {}))
        h_field = lambda x, t: H_FIELDS[config.h_field["id"]](x, t, hf_params)

    # initial PDE fields
    if ptype in ("adr", "wave"):
        cloud.add_field("phi", INITIAL_FIELDS[pde.get("initial", "zero")](cloud))
    if ptype == "wave":
        g2 = INITIAL_FIELDS[pde.get("initial_rate", "zero")](cloud)
        cloud.add_field("phi_prev", cloud.fields["phi"] - config.dt * g2)
        cloud.add_field("f_prev", np.zeros(cloud.n_points))

    table = cloud.neighbor_table()
    stencils = build_stencils_robust(cloud, table) if needs_stencils else None

    nsteps = int(round(config.t_end / config.dt))
    metrics = {"step": [], "t": [], "error": [], "n_points": []}
    log_rows = []
    t = 0.0
    for n in range(nsteps):
        added = merged = contacts = 0
        iters = 0
        residual = 0.0
        if h_field is not None:
            cloud.h = h_field(cloud.positions, t)
        if ptype == "wave":
            cloud.fields["f_prev"] = WAVE_FORCINGS[pde.get("forcing", "zero")](cloud, t)
        # velocity at the current level
        if ptype == "mcf":
            cloud.velocity = mcf_velocity(cloud, stencils, averaged=pde.get("averaged", False),
                                          table=table)
        else:
            cloud.velocity = VELOCITY_LAWS[law](cloud, t, law_params)
        if config.movement_order == 1:
            motion.move_first_order(cloud, config.dt)
        else:
            motion.move_second_order(cloud, config.dt)
        t += config.dt
        if config.adaptation:
            merged = adaptation.merge_close_points(cloud)
            added = adaptation.fill_holes(cloud, h_for_new=(
                None if h_field is None else (lambda xs: h_field(xs, t))))
            if np.any(cloud.boundary):
                added += adaptation.boundary_fill(cloud)
        if config.contact.policy != "none":
            table = cloud.neighbor_table()
            records = contact_mod.detect_contacts(cloud, config.contact.self_contact, table)
            contacts = sum(1 for r in records if r.classification != "none")
            contact_mod.resolve_contacts(cloud, records, config.contact.policy,
                                         config.contact.self_contact, event_log, n)
            if config.contact.policy != "delete":
                contact_mod.store_distances(cloud, records)
            if cloud.n_points == 0:
                log.warning("all points deleted at step %d; stopping", n)
                break
        table = recompute_frames(cloud)
        if needs_stencils:
            stencils = build_stencils_robust(cloud, table)
        if ptype == "adr":
            v_new = VELOCITY_LAWS[law](cloud, t, law_params)
            forcing = pde.get("forcing", "zero")
            info = adr_step(cloud, stencils, config.dt, pde.get("alpha", 1.0),
                            forcing=lambda c, tt: FORCINGS[forcing](c, tt),
                            velocity=v_new, t_new=t)
            iters, residual = info.iterations, info.residual
        elif ptype == "wave":
            v_new = VELOCITY_LAWS[law](cloud, t, law_params)
            info = wave_step(cloud, stencils, config.dt, pde.get("c", 1.0),
                             forcing_values=cloud.fields["f_prev"], velocity=v_new)
            iters, residual = info.iterations, info.residual
        err = REFERENCES[config.reference](cloud, t) if config.reference else np.nan
        metrics["step"].append(n)
        metrics["t"].append(t)
        metrics["error"].append(err)
        metrics["n_points"].append(cloud.n_points)
        log_rows.append((n, iters, residual, cloud.n_points, added, merged, contacts))
        if out.cadence and (n + 1) % out.cadence == 0 and out.vtk:
            from .vtk_io import write_vtk
            write_vtk(cloud, os.path.join(out.directory, f"{config.name}_{n + 1:05d}.vtk"),
                      fields=out.fields or None)
    if out.logs:
        with open(os.path.join(out.directory, f"{config.name}_log.csv"), "w") as f:
            f.write("step,iterations,residual,N,added,merged,contacts\n")
            for row in log_rows:
                f.write(",".join(str(v) for v in row) + "\n")
    if event_log is not None:
        event_log.close()
    metrics = {k: np.asarray(v) for k, v in metrics.items()}
    final = float(metrics["error"][-1]) if config.reference and len(metrics["error"]) else None
    return ScenarioResult(cloud, metrics, log_rows, final)


# ----------------------------------------------------------- presets

def preset(name, **overrides) -> ScenarioConfig:
    builders = {
        "rotating_quarter_sphere": _preset_quarter,
        "hemisphere_stretch": _preset_hemisphere,
        "joining_spheres_nonpen": _preset_join_nonpen,
        "joining_spheres_delete": _preset_join_delete,
        "expanding_sphere_adr": _preset_adr,
        "expanding_sphere_wave": _preset_wave,
        "half_pipe_adr": _preset_half_pipe,
        "dumbbell_mcf": _preset_dumbbell,
        "torus_averaged_mcf": _preset_torus_mcf,
        "addition_error_sphere": _preset_addition_sphere,
        "addition_error_torus": _preset_addition_torus,
        "generic_wave": _preset_generic_wave,
    }
    if name not in builders:
        raise ConfigError(f"unknown preset {name!r} (have: {sorted(builders)})")
    cfg = builders[name]()
    for k, v in overrides.items():
        if not hasattr(cfg, k):
            raise ConfigError(f"unknown config field {k!r}")
        setattr(cfg, k, v)
    cfg.__post_init__()
    return cfg


def _preset_quarter():
    period = 2 * np.pi / math.sqrt(2.0)
    return ScenarioConfig(
        name="rotating_quarter_sphere",
        bodies=[BodyConfig("quarter_sphere", {"radius": 1.0})],
        h=0.0705, velocity={"law": "rotation_quarter", "params": {}},
        dt=0.05, t_end=round(period / 0.05) * 0.05,
        adaptation=False, reference="unit_sphere_dist")


def _preset_hemisphere():
    return ScenarioConfig(
        name="hemisphere_stretch",
        bodies=[BodyConfig("hemisphere", {"radius": 1.0})],
        h=0.1, velocity={"law": "hemisphere_stretch", "params": {}},
        dt=0.005, t_end=0.5, reference="unit_sphere_sq")


def _preset_join_nonpen():
    return ScenarioConfig(
        name="joining_spheres_nonpen",
        bodies=[BodyConfig("sphere", {"radius": 1.0, "center": (-1.1, 0, 0)}, chamber=0),
                BodyConfig("sphere", {"radius": 1.0, "center": (1.1, 0, 0)}, chamber=1)],
        h=0.1, velocity={"law": "approach_x", "params": {"speed": 0.5}},
        dt=0.03, t_end=1.8,
        contact=ContactConfig(policy="non_penetration"))


def _preset_join_delete():
    cfg = _preset_join_nonpen()
    cfg.name = "joining_spheres_delete"
    cfg.contact = ContactConfig(policy="delete")
    cfg.t_end = 1.5
    cfg.h_field = {"id": "band_x", "params": {"h_fine": 0.05, "h_coarse": 0.1,
                                              "w0": 0.35, "w1": 0.7}}
    return cfg


def _preset_adr(h=0.1):
    dt = 1.0 / max(round(1.0 / (0.4 * h * h)), 1)
    return ScenarioConfig(
        name="expanding_sphere_adr",
        bodies=[BodyConfig("sphere", {"radius": 1.0})],
        h=h, velocity={"law": "radial", "params": {"speed": 0.5}},
        pde={"type": "adr", "alpha": 1.0, "forcing": "expanding_sphere_adr",
             "initial": "xy"},
        dt=dt, t_end=1.0, reference="expanding_sphere_adr")


def _preset_wave(h=0.1):
    return ScenarioConfig(
        name="expanding_sphere_wave",
        bodies=[BodyConfig("sphere", {"radius": 1.0})],
        h=h, velocity={"law": "radial", "params": {"speed": 0.5}},
        pde={"type": "wave", "c": 1.0, "forcing": "expanding_sphere_wave",
             "initial": "zero", "initial_rate": "sqrt6_xy"},
        dt=h / 20.0, t_end=1.0, reference="expanding_sphere_wave")


def _preset_half_pipe():
    return ScenarioConfig(
        name="half_pipe_adr",
        bodies=[BodyConfig("half_pipe", {"tube_radius": 0.25, "arc_radius": 0.75})],
        h=0.05, velocity={"law": "half_pipe_twist", "params": {}},
        pde={"type": "adr", "alpha": 0.2, "forcing": "zero",
             "initial": "half_pipe_hotspots"},
        dt=0.01, t_end=2.0)


def _preset_dumbbell():
    return ScenarioConfig(
        name="dumbbell_mcf",
        bodies=[BodyConfig("dumbbell", {})],
        h=0.12, velocity={"law": "zero", "params": {}},
        pde={"type": "mcf", "averaged": False},
        dt=0.005, t_end=0.2,
        contact=ContactConfig(policy="delete", self_contact=True))


def _preset_torus_mcf():
    return ScenarioConfig(
        name="torus_averaged_mcf",
        bodies=[BodyConfig("torus", {"c": 3.0, "a": 1.0})],
        h=0.9, velocity={"law": "zero", "params": {}},
        pde={"type": "mcf", "averaged": True},
        dt=0.05, t_end=10.0,
        contact=ContactConfig(policy="delete", self_contact=True))


def _preset_addition_sphere():
    cfg = ScenarioConfig(name="addition_error_sphere",
                         bodies=[BodyConfig("sphere", {"radius": 1.0})],
                         h=0.1, dt=1.0, t_end=1.0, adaptation=False)
    return cfg


def _preset_addition_torus():
    return ScenarioConfig(name="addition_error_torus",
                          bodies=[BodyConfig("torus", {"c": 3.0, "a": 1.0})],
                          h=0.4, dt=1.0, t_end=1.0, adaptation=False)


def _preset_generic_wave():
    return ScenarioConfig(
        name="generic_wave",
        bodies=[BodyConfig("file", path="cloud.txt")],
        h=0.2, velocity={"law": "zero", "params": {}},
        pde={"type": "wave", "c": 7.0, "forcing": "zero", "initial": "zero",
             "initial_rate": "zero"},
        dt=0.01, t_end=1.2,
        contact=ContactConfig(policy="delete", self_contact=True))


# -------------------------------------------------- refinement study

def addition_error_study(kind, h0, seed=0, curvature_correction=True):
    """Halve h on a static analytic surface, fill the holes, and measure the
    mean off-surface error of the points the filling added."""
    params = {"c": 3.0, "a": 1.0} if kind == "torus" else {"radius": 1.0}
    cloud = generate_surface(kind, params, h0, seed=seed)
    n0 = cloud.n_points
    cloud.h = np.full(cloud.n_points, h0 / 2.0)
    adaptation.fill_holes(cloud, curvature_correction=curvature_correction)
    added = np.arange(n0, cloud.n_points)
    pos = cloud.positions[added]
    if kind == "torus":
        c_r, a_r = params["c"], params["a"]
        err = np.abs((c_r - np.sqrt(pos[:, 0] ** 2 + pos[:, 1] ** 2)) ** 2
                     + pos[:, 2] ** 2 - a_r ** 2)
    else:
        err = np.abs(np.sum(pos ** 2, axis=1) - 1.0)
    return float(err.mean()) if len(err) else 0.0, n0, cloud.n_points
