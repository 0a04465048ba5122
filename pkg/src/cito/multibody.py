"""Planar maximal-coordinate robot description and kinematics.

Each link carries the full planar pose (p_x, p_z, theta) with p the
center of mass in the world frame, so the mass matrix is constant and
block diagonal.  Revolute joints become algebraic constraints between
anchor points; contact points live on links and interact with a terrain
surface that is either flat or an implicit curve h(p) = 0.

Anchor and offset vectors in the specs are expressed in the link's
geometric frame; they are shifted by ``com_offset`` internally so that
the generalized coordinates remain CoM coordinates.
"""

import json
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np
import sympy

__all__ = [
    "LinkSpec",
    "JointSpec",
    "ContactSpec",
    "FlatSurface",
    "ImplicitSurface",
    "RobotModel",
    "SurfaceGradientError",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "mass_matrix",
    "generalized_forces",
    "joint_constraint",
    "contact_kinematics",
    "contact_frame",
    "signed_distance",
]


class SurfaceGradientError(ValueError):
    """The surface gradient vanished where a contact frame was requested."""


def _vec2(v):
    v = tuple(float(c) for c in v)
    if len(v) != 2:
        raise ValueError("expected a 2-vector")
    return v


@dataclass(frozen=True)
class LinkSpec:
    mass: float
    inertia: float
    com_offset: tuple = (0.0, 0.0)
    geometry_length: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("link mass must be positive")
        if not self.inertia > 0:
            raise ValueError("link inertia must be positive")
        object.__setattr__(self, "com_offset", _vec2(self.com_offset))


@dataclass(frozen=True)
class JointSpec:
    """Revolute joint; ``parent_link == -1`` pins the child to the world."""

    parent_link: int
    child_link: int
    parent_anchor: tuple
    child_anchor: tuple
    stiffness: float = 0.0
    damping: float = 0.0
    rest_angle: float = 0.0
    torque_min: float = 0.0
    torque_max: float = 0.0
    actuated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parent_anchor", _vec2(self.parent_anchor))
        object.__setattr__(self, "child_anchor", _vec2(self.child_anchor))
        if self.torque_min > self.torque_max:
            raise ValueError("torque_min must not exceed torque_max")
        if not self.actuated and (self.torque_min != 0.0 or self.torque_max != 0.0):
            raise ValueError("non-actuated joints must have zero torque bounds")


@dataclass(frozen=True)
class ContactSpec:
    link: int
    local_offset: tuple
    friction_mu: float = 1.0
    restitution: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "local_offset", _vec2(self.local_offset))
        if self.friction_mu < 0:
            raise ValueError("friction coefficient must be nonnegative")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")


@dataclass(frozen=True)
class FlatSurface:
    """Horizontal ground ``p_z = height``."""

    height: float = 0.0
    kind: str = field(default="flat", init=False)

    def value(self, p):
        return p[1] - self.height

    def gradient(self, p):
        return jnp.array([0.0, 1.0])

    def signed_distance(self, p):
        return p[1] - self.height


_ALLOWED_FUNCS = {"sin": sympy.sin, "cos": sympy.cos}


def _validate_expression(expr):
    allowed = (
        sympy.Symbol,
        sympy.Number,
        sympy.Add,
        sympy.Mul,
        sympy.Pow,
        sympy.sin,
        sympy.cos,
    )
    for node in sympy.preorder_traversal(expr):
        if not isinstance(node, allowed):
            raise ValueError(f"surface expression uses unsupported operation: {node!r}")
        if isinstance(node, sympy.Symbol) and node.name not in ("px", "pz"):
            raise ValueError(f"surface expression may only use px, pz: got {node.name}")


@dataclass(frozen=True)
class ImplicitSurface:
    """Terrain given implicitly by ``h(px, pz) = 0`` with h from a small
    expression grammar (constants, +, -, *, **, sin, cos)."""

    expression: str
    kind: str = field(default="implicit", init=False)

    def __post_init__(self):
        px, pz = sympy.symbols("px pz")
        expr = sympy.sympify(self.expression, locals=dict(_ALLOWED_FUNCS, px=px, pz=pz))
        _validate_expression(expr)
        gx = sympy.diff(expr, px)
        gz = sympy.diff(expr, pz)
        lam = lambda e: sympy.lambdify((px, pz), e, modules="jax")
        object.__setattr__(self, "_h", lam(expr))
        object.__setattr__(self, "_gx", lam(gx))
        object.__setattr__(self, "_gz", lam(gz))

    def value(self, p):
        return self._h(p[0], p[1])

    def gradient(self, p):
        return jnp.stack([jnp.asarray(self._gx(p[0], p[1]), dtype=float),
                          jnp.asarray(self._gz(p[0], p[1]), dtype=float)])

    def signed_distance(self, p):
        g = self.gradient(p)
        return self.value(p) / jnp.sqrt(jnp.dot(g, g))


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Immutable planar multibody description.

    State layout: q stacks (p_x, p_z, theta) per link with p the link
    CoM in world coordinates; v is the matching velocity vector.
    """

    links: tuple
    joints: tuple
    contacts: tuple
    surface: object
    gravity: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "contacts", tuple(self.contacts))
        n = len(self.links)
        if n == 0:
            raise ValueError("model needs at least one link")
        for j in self.joints:
            if not (-1 <= j.parent_link < n) or j.parent_link == j.child_link:
                raise ValueError("joint references an invalid parent link")
            if not (0 <= j.child_link < n):
                raise ValueError("joint references an invalid child link")
        for c in self.contacts:
            if not (0 <= c.link < n):
                raise ValueError("contact references an invalid link")
        self._check_connected()

    def _check_connected(self):
        # union-find over links; world (-1) acts as an extra node
        parent = list(range(len(self.links) + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for j in self.joints:
            a = find(j.parent_link if j.parent_link >= 0 else len(self.links))
            b = find(j.child_link)
            parent[a] = b
        roots = {find(i) for i in range(len(self.links))}
        if len(roots) > 1:
            raise ValueError("joint graph does not connect all links")

    @property
    def n_links(self):
        return len(self.links)

    @property
    def n_q(self):
        return 3 * len(self.links)

    @property
    def n_j(self):
        return 2 * len(self.joints)

    @property
    def n_c(self):
        return len(self.contacts)

    @property
    def n_d(self):
        return 2

    @property
    def n_a(self):
        return sum(1 for j in self.joints if j.actuated)

    @property
    def actuated_joints(self):
        return tuple(i for i, j in enumerate(self.joints) if j.actuated)

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other


def _rot(theta):
    c, s = jnp.cos(theta), jnp.sin(theta)
    return jnp.array([[c, -s], [s, c]])


def _link_point(model, q, link, local):
    """World position of a geometric-frame point on a link."""
    spec = model.links[link]
    r = jnp.asarray(local, dtype=float) - jnp.asarray(spec.com_offset)
    p = q[3 * link : 3 * link + 2]
    return p + _rot(q[3 * link + 2]) @ r


def mass_matrix(model):
    """Constant block-diagonal mass matrix diag(m_i, m_i, I_i)."""
    d = jnp.concatenate(
        [jnp.array([l.mass, l.mass, l.inertia]) for l in model.links]
    )
    return jnp.diag(d)


def mass_diag(model):
    """Diagonal of the mass matrix as a vector (planar M is diagonal)."""
    return jnp.concatenate([jnp.array([l.mass, l.mass, l.inertia]) for l in model.links])


def generalized_forces(model, q, v, tau=None):
    """Gravity, joint torque couples and joint spring/damper couples.

    ``tau`` holds one torque per actuated joint, in joint order.
    """
    q = jnp.asarray(q, dtype=float)
    v = jnp.asarray(v, dtype=float)
    if tau is None:
        tau = jnp.zeros(model.n_a)
    tau = jnp.atleast_1d(jnp.asarray(tau, dtype=float))
    if tau.shape[0] != model.n_a:
        raise ValueError(f"expected {model.n_a} actuated torques, got {tau.shape[0]}")

    w = jnp.zeros(model.n_q)
    for i, link in enumerate(model.links):
        w = w.at[3 * i + 1].add(-link.mass * model.gravity)

    act = {j: k for k, j in enumerate(model.actuated_joints)}
    for jidx, joint in enumerate(model.joints):
        th_c = q[3 * joint.child_link + 2]
        om_c = v[3 * joint.child_link + 2]
        if joint.parent_link >= 0:
            th_p = q[3 * joint.parent_link + 2]
            om_p = v[3 * joint.parent_link + 2]
        else:
            th_p = 0.0
            om_p = 0.0
        m = 0.0
        if joint.actuated:
            m = m + tau[act[jidx]]
        if joint.stiffness != 0.0 or joint.damping != 0.0:
            rel = th_c - th_p - joint.rest_angle
            m = m - joint.stiffness * rel - joint.damping * (om_c - om_p)
        w = w.at[3 * joint.child_link + 2].add(m)
        if joint.parent_link >= 0:
            w = w.at[3 * joint.parent_link + 2].add(-m)
    return w


def joint_constraint_value(model, q):
    """Stacked anchor-coincidence residuals, two rows per revolute joint."""
    q = jnp.asarray(q, dtype=float)
    rows = []
    for joint in model.joints:
        pc = _link_point(model, q, joint.child_link, joint.child_anchor)
        if joint.parent_link >= 0:
            pp = _link_point(model, q, joint.parent_link, joint.parent_anchor)
        else:
            pp = jnp.asarray(joint.parent_anchor, dtype=float)
        rows.append(pp - pc)
    if not rows:
        return jnp.zeros(0)
    return jnp.concatenate(rows)


def joint_constraint(model, q, v=None):
    """Joint constraint c(q), its Jacobian, and the curvature term v' H v.

    The curvature vector is the quadratic-in-velocity term that appears
    when the constraint is differentiated twice along the motion.
    """
    q = jnp.asarray(q, dtype=float)
    c = joint_constraint_value(model, q)
    jac = jax.jacfwd(lambda qq: joint_constraint_value(model, qq))(q)
    if v is None:
        curv = jnp.zeros(model.n_j)
    else:
        v = jnp.asarray(v, dtype=float)
        _, curv = jax.jvp(
            lambda qq: jax.jacfwd(lambda x: joint_constraint_value(model, x))(qq) @ v,
            (q,),
            (v,),
        )
    return c, jac, curv


def contact_position(model, q, i):
    if not 0 <= i < model.n_c:
        raise IndexError(f"contact index {i} out of range")
    spec = model.contacts[i]
    return _link_point(model, jnp.asarray(q, dtype=float), spec.link, spec.local_offset)


def contact_kinematics(model, q, i):
    """World position of contact point i and its Jacobian d pos / d q."""
    q = jnp.asarray(q, dtype=float)
    pos = contact_position(model, q, i)
    jac = jax.jacfwd(lambda qq: contact_position(model, qq, i))(q)
    return pos, jac


def _check_gradient(g):
    if isinstance(g, jax.core.Tracer):
        return
    gn = np.asarray(g, dtype=float)
    if float(gn @ gn) == 0.0:
        raise SurfaceGradientError("surface gradient vanished at contact point")


def contact_frame(model, q, i):
    """Unit surface normal/tangent at contact i and the contact-to-world rotation."""
    pos = contact_position(model, q, i)
    g = model.surface.gradient(pos)
    _check_gradient(g)
    n = g / jnp.sqrt(jnp.dot(g, g))
    t = jnp.array([n[1], -n[0]])
    rot = jnp.stack([t, n], axis=1)
    return n, t, rot


def signed_distance(model, q, i):
    """Signed distance of contact point i to the terrain and its q-gradient.

    Flat terrain is exact; implicit terrain uses h / |grad h| evaluated at
    the contact point.
    """
    q = jnp.asarray(q, dtype=float)

    def sd_of_q(qq):
        pos = contact_position(model, qq, i)
        g = model.surface.gradient(pos)
        _check_gradient(g)
        return model.surface.signed_distance(pos)

    sd = sd_of_q(q)
    grad = jax.grad(sd_of_q)(q)
    return sd, grad


# ---------------------------------------------------------------------------
# serialization

_LINK_KEYS = {"mass", "inertia", "com_offset", "geometry_length"}
_JOINT_KEYS = {
    "parent_link", "child_link", "parent_anchor", "child_anchor",
    "stiffness", "damping", "rest_angle", "torque_min", "torque_max", "actuated",
}
_CONTACT_KEYS = {"link", "local_offset", "friction_mu", "restitution"}
_TOP_KEYS = {"links", "joints", "contacts", "surface", "gravity"}


def _check_keys(d, allowed, what):
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")


def model_from_dict(data):
    _check_keys(data, _TOP_KEYS, "model")
    links = []
    for d in data.get("links", []):
        _check_keys(d, _LINK_KEYS, "link")
        links.append(LinkSpec(**d))
    joints = []
    for d in data.get("joints", []):
        _check_keys(d, _JOINT_KEYS, "joint")
        joints.append(JointSpec(**d))
    contacts = []
    for d in data.get("contacts", []):
        _check_keys(d, _CONTACT_KEYS, "contact")
        contacts.append(ContactSpec(**d))
    sdata = dict(data["surface"])
    kind = sdata.pop("kind")
    if kind == "flat":
        _check_keys(sdata, {"height"}, "surface")
        surface = FlatSurface(**sdata)
    elif kind == "implicit":
        _check_keys(sdata, {"expression"}, "surface")
        surface = ImplicitSurface(**sdata)
    else:
        raise ValueError(f"unknown surface kind: {kind}")
    return RobotModel(
        links=tuple(links),
        joints=tuple(joints),
        contacts=tuple(contacts),
        surface=surface,
        gravity=float(data.get("gravity", 9.81)),
    )


def model_to_dict(model):
    surf = {"kind": model.surface.kind}
    if model.surface.kind == "flat":
        surf["height"] = model.surface.height
    else:
        surf["expression"] = model.surface.expression
    return {
        "gravity": model.gravity,
        "links": [
            {
                "mass": l.mass,
                "inertia": l.inertia,
                "com_offset": list(l.com_offset),
                "geometry_length": l.geometry_length,
            }
            for l in model.links
        ],
        "joints": [
            {
                "parent_link": j.parent_link,
                "child_link": j.child_link,
                "parent_anchor": list(j.parent_anchor),
                "child_anchor": list(j.child_anchor),
                "stiffness": j.stiffness,
                "damping": j.damping,
                "rest_angle": j.rest_angle,
                "torque_min": j.torque_min,
                "torque_max": j.torque_max,
                "actuated": j.actuated,
            }
            for j in model.joints
        ],
        "contacts": [
            {
                "link": c.link,
                "local_offset": list(c.local_offset),
                "friction_mu": c.friction_mu,
                "restitution": c.restitution,
            }
            for c in model.contacts
        ],
        "surface": surf,
    }


def load_model(path):
    """Load a robot model from a JSON file; unknown keys are rejected."""
    with open(path) as f:
        data = json.load(f)
    return model_from_dict(data)
