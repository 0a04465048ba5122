import numpy as np
import pytest

from cito.multibody import (
    ContactSpec,
    FlatSurface,
    ImplicitSurface,
    JointSpec,
    LinkSpec,
    RobotModel,
    SurfaceGradientError,
    contact_frame,
    contact_kinematics,
    generalized_forces,
    joint_constraint,
    joint_constraint_value,
    load_model,
    mass_matrix,
    model_from_dict,
    model_to_dict,
    signed_distance,
)
from conftest import hanging_double_pendulum_q


def fd_jacobian(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    jac = np.zeros(f0.shape + x.shape)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[..., i] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h)
    return jac


class TestMassMatrix:
    def test_single_link(self, free_link_model):
        M = np.asarray(mass_matrix(free_link_model))
        assert np.allclose(M, np.diag([2.0, 2.0, 0.5]))

    def test_two_links(self, double_pendulum_model):
        M = np.asarray(mass_matrix(double_pendulum_model))
        assert np.allclose(M, np.diag([1, 1, 1 / 12, 1, 1, 1 / 12]))

    def test_configuration_independent(self, double_pendulum_model):
        # maximal-coordinate planar mass matrix has no q dependence
        M = np.asarray(mass_matrix(double_pendulum_model))
        assert np.all(np.linalg.eigvalsh(M) > 0)


class TestGeneralizedForces:
    def test_gravity_only(self, free_link_model):
        w = np.asarray(generalized_forces(free_link_model, np.zeros(3), np.zeros(3)))
        assert np.allclose(w, [0.0, -2.0 * 9.81, 0.0])

    def test_torque_couple(self, double_pendulum_model):
        q = hanging_double_pendulum_q()
        w = np.asarray(generalized_forces(double_pendulum_model, q, np.zeros(6), np.array([1.0])))
        w0 = np.asarray(generalized_forces(double_pendulum_model, q, np.zeros(6), np.array([0.0])))
        d = w - w0
        assert d[2] == pytest.approx(-1.0)
        assert d[5] == pytest.approx(1.0)
        assert np.allclose(np.delete(d, [2, 5]), 0.0)

    def test_spring_couple(self):
        model = RobotModel(
            links=(LinkSpec(mass=1.0, inertia=0.1), LinkSpec(mass=1.0, inertia=0.1)),
            joints=(
                JointSpec(
                    parent_link=0,
                    child_link=1,
                    parent_anchor=(0.5, 0.0),
                    child_anchor=(-0.5, 0.0),
                    stiffness=10.0,
                    rest_angle=0.0,
                ),
            ),
            contacts=(),
            surface=FlatSurface(height=-10.0),
        )
        q = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.2])
        w = np.asarray(generalized_forces(model, q, np.zeros(6)))
        # spring torque magnitude k * dtheta = 2 applied as a couple
        assert w[5] == pytest.approx(-2.0)
        assert w[2] == pytest.approx(2.0)


class TestJointConstraint:
    def test_consistent_configuration(self, double_pendulum_model):
        c = np.asarray(joint_constraint_value(double_pendulum_model, hanging_double_pendulum_q()))
        assert np.allclose(c, 0.0, atol=1e-12)

    def test_translated_child(self, double_pendulum_model):
        q = hanging_double_pendulum_q()
        q[3] += 0.1
        c = np.asarray(joint_constraint_value(double_pendulum_model, q))
        assert np.allclose(np.abs(c), [0, 0, 0.1, 0], atol=1e-12)

    def test_jacobian_fd(self, double_pendulum_model):
        rng = np.random.default_rng(4)
        for _ in range(10):
            q = rng.normal(size=6)
            _, jac, _ = joint_constraint(double_pendulum_model, q)
            fd = fd_jacobian(lambda x: joint_constraint_value(double_pendulum_model, x), q)
            assert np.allclose(np.asarray(jac), fd, rtol=1e-5, atol=1e-7)

    def test_curvature_fd(self, double_pendulum_model):
        rng = np.random.default_rng(5)
        for _ in range(10):
            q = rng.normal(size=6)
            v = rng.normal(size=6)
            _, _, curv = joint_constraint(double_pendulum_model, q, v)

            def jac_v(x):
                _, jac, _ = joint_constraint(double_pendulum_model, x)
                return np.asarray(jac) @ v

            h = 1e-6
            fd = (jac_v(q + h * v) - jac_v(q - h * v)) / (2 * h)
            assert np.allclose(np.asarray(curv), fd, rtol=1e-5, atol=1e-5)


class TestContactKinematics:
    def test_zero_offset(self, point_mass_model):
        q = np.array([0.3, 0.7, 0.1])
        pos, jac = contact_kinematics(point_mass_model, q, 0)
        assert np.allclose(np.asarray(pos), [0.3, 0.7])
        assert np.allclose(np.asarray(jac), [[1, 0, 0], [0, 1, 0]])

    def test_rotated_offset(self):
        model = RobotModel(
            links=(LinkSpec(mass=1.0, inertia=0.1),),
            joints=(),
            contacts=(ContactSpec(link=0, local_offset=(1.0, 0.0)),),
            surface=FlatSurface(),
        )
        q = np.array([0.0, 0.0, np.pi / 2])
        pos, _ = contact_kinematics(model, q, 0)
        assert np.allclose(np.asarray(pos), [0.0, 1.0], atol=1e-12)

    def test_jacobian_fd(self, sinusoid_model):
        rng = np.random.default_rng(6)
        for _ in range(10):
            q = rng.normal(size=3)
            _, jac = contact_kinematics(sinusoid_model, q, 0)
            fd = fd_jacobian(lambda x: contact_kinematics(sinusoid_model, x, 0)[0], q)
            assert np.allclose(np.asarray(jac), fd, rtol=1e-6, atol=1e-8)

    def test_index_out_of_range(self, point_mass_model):
        with pytest.raises(IndexError):
            contact_kinematics(point_mass_model, np.zeros(3), 5)


class TestContactFrame:
    def test_flat(self, point_mass_model):
        n, t, rot = contact_frame(point_mass_model, np.array([0.0, 1.0, 0.0]), 0)
        assert np.allclose(np.asarray(n), [0, 1])
        assert np.allclose(np.asarray(t), [1, 0])
        assert np.allclose(np.asarray(rot), np.eye(2))

    def test_orthonormal_right_handed(self, sinusoid_model):
        rng = np.random.default_rng(7)
        for _ in range(20):
            q = rng.normal(size=3)
            _, _, rot = contact_frame(sinusoid_model, q, 0)
            R = np.asarray(rot)
            assert np.allclose(R.T @ R, np.eye(2), atol=1e-12)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_sinusoid_normal(self, sinusoid_model):
        n, _, _ = contact_frame(sinusoid_model, np.array([0.0, 0.3, 0.0]), 0)
        expected = np.array([-0.1, 1.0]) / np.sqrt(1.01)
        assert np.allclose(np.asarray(n), expected, atol=1e-12)

    def test_zero_gradient_raises(self):
        model = RobotModel(
            links=(LinkSpec(mass=1.0, inertia=0.1),),
            joints=(),
            contacts=(ContactSpec(link=0, local_offset=(0.0, 0.0)),),
            surface=ImplicitSurface(expression="px*pz"),
        )
        with pytest.raises(SurfaceGradientError):
            contact_frame(model, np.zeros(3), 0)


class TestSignedDistance:
    def test_flat(self, point_mass_model):
        sd, _ = signed_distance(point_mass_model, np.array([0.5, 0.2, 0.0]), 0)
        assert float(sd) == pytest.approx(0.2, abs=1e-14)

    def test_on_surface(self, sinusoid_model):
        px = 0.7
        q = np.array([px, 0.1 * np.sin(px), 0.0])
        sd, _ = signed_distance(sinusoid_model, q, 0)
        assert float(sd) == pytest.approx(0.0, abs=1e-14)

    def test_sinusoid_value(self, sinusoid_model):
        sd, _ = signed_distance(sinusoid_model, np.array([0.0, 0.3, 0.0]), 0)
        assert float(sd) == pytest.approx(0.3 / np.sqrt(1.01), abs=1e-5)

    def test_gradient_fd(self, sinusoid_model):
        rng = np.random.default_rng(8)
        for _ in range(20):
            q = rng.normal(size=3)
            _, grad = signed_distance(sinusoid_model, q, 0)
            fd = fd_jacobian(lambda x: signed_distance(sinusoid_model, x, 0)[0], q)
            assert np.allclose(np.asarray(grad), fd, rtol=1e-5, atol=1e-7)

    def test_flat_matches_implicit_formula(self):
        flat = RobotModel(
            links=(LinkSpec(mass=1.0, inertia=0.1),),
            joints=(),
            contacts=(ContactSpec(link=0, local_offset=(0.0, 0.0)),),
            surface=FlatSurface(height=0.3),
        )
        implicit = RobotModel(
            links=flat.links,
            joints=(),
            contacts=flat.contacts,
            surface=ImplicitSurface(expression="pz - 0.3"),
        )
        rng = np.random.default_rng(9)
        for _ in range(10):
            q = rng.normal(size=3)
            sd1, g1 = signed_distance(flat, q, 0)
            sd2, g2 = signed_distance(implicit, q, 0)
            assert float(sd1) == pytest.approx(float(sd2), abs=1e-12)
            assert np.allclose(np.asarray(g1), np.asarray(g2), atol=1e-12)


class TestValidationAndIO:
    def test_bad_mass(self):
        with pytest.raises(ValueError):
            LinkSpec(mass=0.0, inertia=0.1)

    def test_bad_restitution(self):
        with pytest.raises(ValueError):
            ContactSpec(link=0, local_offset=(0, 0), restitution=1.5)

    def test_disconnected_graph(self):
        with pytest.raises(ValueError, match="connect"):
            RobotModel(
                links=(LinkSpec(mass=1, inertia=1), LinkSpec(mass=1, inertia=1)),
                joints=(),
                contacts=(),
                surface=FlatSurface(),
            )

    def test_expression_grammar_rejects_exotics(self):
        with pytest.raises(ValueError):
            ImplicitSurface(expression="exp(px) - pz")
        with pytest.raises(ValueError):
            ImplicitSurface(expression="pz - foo")

    def test_round_trip(self, tmp_path, double_pendulum_model):
        d = model_to_dict(double_pendulum_model)
        path = tmp_path / "model.json"
        import json

        path.write_text(json.dumps(d))
        loaded = load_model(path)
        assert model_to_dict(loaded) == d

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            model_from_dict(
                {
                    "links": [{"mass": 1, "inertia": 1}],
                    "surface": {"kind": "flat", "height": 0.0},
                    "bogus": 1,
                }
            )
