import numpy as np
import pytest

from netcrit.errors import NonSquareLayer, NotWidthOne, RankOutOfRange
from netcrit.networks import (
    Architecture,
    TrainingSet,
    build_gradient_system,
    build_loss,
    build_product_minors,
    flatten,
    generate_realizable_data,
    residual_shift,
    symbolic_product,
    unflatten,
    width1_oracle,
)
from netcrit.poly import Polynomial, evaluate

from oracles import gradient_fd, loss_value

SINGLE = TrainingSet(x=np.array([[1.0]]), y=np.array([[1.0]]))


def w(i, n):
    return Polynomial.variable(i, n)


def test_architecture_counts():
    arch = Architecture(dims=(2, 2, 2, 1))
    assert arch.nlayers == 3
    assert arch.width == 1
    assert arch.nvars == 4 + 4 + 2
    assert arch.variable_groups() == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]


def test_loss_two_weight_chain():
    arch = Architecture(dims=(1, 1, 1))
    loss = build_loss(arch, SINGLE)
    expected = 0.5 * (w(0, 2) * w(1, 2) - 1.0) * (w(0, 2) * w(1, 2) - 1.0)
    assert loss == expected


def test_loss_two_weight_residual_chain():
    arch = Architecture(dims=(1, 1, 1), residual=True)
    loss = build_loss(arch, SINGLE)
    lhs = (w(0, 2) + 1.0) * (w(1, 2) + 1.0) - 1.0
    assert loss == 0.5 * lhs * lhs


def test_loss_at_origin_is_target_scale():
    arch = Architecture(dims=(2, 2, 2))
    data = generate_realizable_data(arch, m=2, seed=5)
    loss = build_loss(arch, data)
    at0 = evaluate(loss, np.zeros(arch.nvars))
    assert at0 == pytest.approx(data.target_scale(), rel=1e-12)


def test_loss_degree_law():
    for dims in [(1, 1, 1), (2, 1, 2), (2, 2, 2), (1, 1, 1, 1)]:
        arch = Architecture(dims=dims)
        data = generate_realizable_data(arch, m=2, seed=3)
        assert build_loss(arch, data).total_degree() == 2 * arch.nlayers


def test_gradient_two_weight_chain():
    arch = Architecture(dims=(1, 1, 1))
    grad = build_gradient_system(build_loss(arch, SINGLE))
    core = w(0, 2) * w(1, 2) - 1.0
    assert grad.polys[0] == w(1, 2) * core
    assert grad.polys[1] == w(0, 2) * core


def test_gradient_width1_chain_structure():
    # three-weight chain: i-th equation is (prod w * x - y) * x * prod_{k != i} w
    arch = Architecture(dims=(1, 1, 1, 1))
    x, y = 2.0, 3.0
    data = TrainingSet(x=np.array([[x]]), y=np.array([[y]]))
    grad = build_gradient_system(build_loss(arch, data))
    n = 3
    prod = w(0, n) * w(1, n) * w(2, n)
    for i in range(n):
        others = Polynomial.constant(1.0, n)
        for k in range(n):
            if k != i:
                others = others * w(k, n)
        expected = (prod * x - y) * (x * others)
        assert grad.polys[i] == expected


def test_gradient_vanishes_at_teacher_point():
    arch = Architecture(dims=(2, 1, 2))
    data = generate_realizable_data(arch, m=2, seed=11)
    grad = build_gradient_system(build_loss(arch, data))
    # factor the (rank-1) target map exactly through the bottleneck via SVD
    prod_target = data.y @ np.linalg.pinv(data.x)
    u, s, vt = np.linalg.svd(prod_target)
    w1 = s[0] * vt[:1, :]
    w2 = u[:, :1]
    assert np.linalg.norm(w2 @ w1 - prod_target) < 1e-10
    point = flatten([w1, w2], arch)
    assert grad.residual(point) < 1e-8


def test_gradient_degrees_and_multidegrees():
    arch = Architecture(dims=(2, 2, 2))
    data = generate_realizable_data(arch, m=2, seed=7)
    grad = build_gradient_system(build_loss(arch, data))
    groups = arch.variable_groups()
    assert all(d == 2 * arch.depth + 1 for d in grad.degrees())
    offsets = arch.layer_offsets()
    for var in range(arch.nvars):
        layer = next(k for k in range(arch.nlayers) if offsets[k] <= var < offsets[k + 1])
        mdeg = [grad.polys[var].degree_in(g) for g in groups]
        for g_index, d in enumerate(mdeg):
            assert d == (1 if g_index == layer else 2)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(13)
    for dims in [(1, 1, 1), (2, 1, 2), (2, 2, 2)]:
        arch = Architecture(dims=dims)
        data = generate_realizable_data(arch, m=2, seed=2)
        grad = build_gradient_system(build_loss(arch, data))

        def direct(z):
            return loss_value(dims, False, data.x, data.y, z)

        for _ in range(20):
            point = 0.5 * (rng.standard_normal(arch.nvars) + 1j * rng.standard_normal(arch.nvars))
            exact = grad.evaluate_at(point)
            approx = gradient_fd(direct, point)
            scale = max(1.0, np.max(np.abs(exact)))
            assert np.max(np.abs(exact - approx)) < 1e-6 * scale


def test_minors_2_2_2():
    arch = Architecture(dims=(2, 2, 2))
    entries = build_product_minors(arch, 1)
    assert len(entries) == 4
    prod = symbolic_product(arch)
    assert list(entries) == [prod[0][0], prod[0][1], prod[1][0], prod[1][1]]
    det = build_product_minors(arch, 2)
    assert len(det) == 1
    assert det.polys[0] == prod[0][0] * prod[1][1] - prod[0][1] * prod[1][0]


def test_minors_2_2_2_1():
    arch = Architecture(dims=(2, 2, 2, 1))
    entries = build_product_minors(arch, 1)
    assert len(entries) == 2
    with pytest.raises(RankOutOfRange):
        build_product_minors(arch, 2)


def test_minor_vanishes_on_rank_deficient_point():
    arch = Architecture(dims=(2, 2, 2))
    det = build_product_minors(arch, 2).polys[0]
    w1 = np.array([[1.0, 2.0], [2.0, 4.0]])  # rank 1
    w2 = np.array([[0.3, -1.2], [0.7, 0.5]])
    point = flatten([w1, w2], arch)
    assert abs(evaluate(det, point)) < 1e-12


def test_residual_shift_zero_to_identity():
    arch = Architecture(dims=(2, 2, 2), residual=True)
    shifted = residual_shift(np.zeros(arch.nvars), arch, "to_plain")
    eye = np.eye(2)
    assert np.array_equal(unflatten(shifted, arch)[0], eye)
    assert np.array_equal(unflatten(shifted, arch)[1], eye)


def test_residual_shift_involution_bit_exact():
    # dyadic coordinates: adding/subtracting 1 is exact in IEEE double
    arch = Architecture(dims=(2, 2, 2))
    rng = np.random.default_rng(17)
    for _ in range(50):
        point = (rng.integers(-64, 65, arch.nvars) / 16.0) + 1j * (
            rng.integers(-64, 65, arch.nvars) / 16.0
        )
        there = residual_shift(point, arch, "to_plain")
        back = residual_shift(there, arch, "to_residual")
        assert np.array_equal(back, point)


def test_residual_shift_rejects_rectangular():
    with pytest.raises(NonSquareLayer):
        residual_shift(np.zeros(6), Architecture(dims=(2, 1, 2)), "to_plain")


def test_residual_loss_is_translated_plain_loss():
    arch_plain = Architecture(dims=(2, 2, 2))
    arch_res = Architecture(dims=(2, 2, 2), residual=True)
    data = generate_realizable_data(arch_plain, m=2, seed=23)
    loss_plain = build_loss(arch_plain, data)
    loss_res = build_loss(arch_res, data)
    rng = np.random.default_rng(29)
    for _ in range(100):
        p = rng.standard_normal(arch_res.nvars) + 1j * rng.standard_normal(arch_res.nvars)
        lhs = evaluate(loss_plain, residual_shift(p, arch_plain, "to_plain"))
        rhs = evaluate(loss_res, p)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_width1_oracle_rows():
    arch = Architecture(dims=(1, 1, 1, 1, 1))
    data = generate_realizable_data(arch, m=2, seed=31)
    rows = width1_oracle(arch, data)
    assert rows[0].dim == 3 and rows[0].degree == 4 and rows[0].count == 1
    assert not rows[0].contains_origin
    assert rows[1].dim == 2 and rows[1].degree == 1 and rows[1].count == 6
    assert rows[1].contains_origin

    arch2 = Architecture(dims=(1, 1, 1))
    rows2 = width1_oracle(arch2, SINGLE)
    assert rows2[0].dim == 1 and rows2[0].degree == 2
    assert rows2[1].dim == 0 and rows2[1].degree == 1 and rows2[1].count == 1


def test_width1_oracle_pair_count():
    for nlayers in (2, 3, 4):
        arch = Architecture(dims=(1,) * (nlayers + 1))
        data = generate_realizable_data(arch, m=1, seed=3)
        rows = width1_oracle(arch, data)
        assert rows[1].count == nlayers * (nlayers - 1) // 2


def test_width1_oracle_rejects_wide_nets():
    arch = Architecture(dims=(2, 1, 2))
    data = generate_realizable_data(arch, m=2, seed=5)
    with pytest.raises(NotWidthOne):
        width1_oracle(arch, data)


def test_realizable_data_teacher_loss_zero():
    for dims in [(1, 1, 1), (2, 2, 2), (2, 1, 2)]:
        arch = Architecture(dims=dims)
        data, teacher = generate_realizable_data(arch, m=2, seed=37, return_teacher=True)
        loss = build_loss(arch, data)
        assert abs(evaluate(loss, teacher)) < 1e-10


def test_realizable_data_deterministic():
    arch = Architecture(dims=(2, 2, 2))
    data = generate_realizable_data(arch, m=2, seed=37)
    data2 = generate_realizable_data(arch, m=2, seed=37)
    assert np.array_equal(data.x, data2.x)
    assert np.array_equal(data.y, data2.y)
    res_twin = generate_realizable_data(Architecture(dims=(2, 2, 2), residual=True), m=2, seed=37)
    assert np.array_equal(data.x, res_twin.x)
    assert np.array_equal(data.y, res_twin.y)


def test_realizable_data_rank():
    arch = Architecture(dims=(2, 2, 2))
    data = generate_realizable_data(arch, m=2, seed=41)
    prod_target = data.y @ np.linalg.pinv(data.x)
    s = np.linalg.svd(prod_target, compute_uv=False)
    assert s[-1] > 1e-8 * s[0]
