import math

import pytest
import torch
from hypothesis import given, strategies as st

from dialrex.fusion import AdaptiveGates, attend, attend_weights, gate_fuse, mean_pool


def vec(*xs):
    return torch.tensor(xs, dtype=torch.float64)


def finite_diff(fn, tensors, step=1e-6):
    """Central differences of a scalar fn w.r.t. each tensor, elementwise."""
    grads = []
    for t in tensors:
        g = torch.zeros_like(t)
        flat = t.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + step
            up = float(fn())
            flat[i] = orig - step
            down = float(fn())
            flat[i] = orig
            g.view(-1)[i] = (up - down) / (2 * step)
        grads.append(g)
    return grads


# ----------------------------------------------------------------- attend

def test_singleton_identity():
    t1 = vec(0.3, -1.2, 0.7)
    out = attend(t1.unsqueeze(0), vec(1.0, 2.0, 3.0))
    assert torch.allclose(out, t1, rtol=0, atol=1e-15)


def test_equal_vectors_average_to_themselves():
    t1 = vec(0.5, -0.5)
    out = attend(torch.stack([t1, t1]), vec(2.0, 1.0))
    assert torch.allclose(out, t1, rtol=0, atol=1e-15)


def test_hand_computed_two_vector_case():
    values = torch.stack([vec(1.0, 0.0), vec(0.0, 1.0)])
    query = vec(1.0, 0.0)
    out = attend(values, query)
    a1 = math.exp(1) / (math.exp(1) + 1)
    assert torch.allclose(out, vec(a1, 1 - a1), atol=1e-12)
    assert torch.allclose(out, vec(0.731, 0.269), atol=1e-3)


def test_empty_values_error():
    with pytest.raises(ValueError):
        attend(torch.zeros(0, 3, dtype=torch.float64), vec(1.0, 1.0, 1.0))


finite = st.floats(min_value=-5, max_value=5, allow_nan=False)


@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=1, max_size=5),
       st.lists(finite, min_size=3, max_size=3))
def test_attend_convex_hull_and_weights(rows, q):
    values = torch.tensor(rows, dtype=torch.float64)
    query = torch.tensor(q, dtype=torch.float64)
    weights = attend_weights(values, query)
    assert math.isclose(float(weights.sum()), 1.0, abs_tol=1e-6)
    assert ((weights > 0) & (weights < 1 + 1e-12)).all()
    out = attend(values, query)
    lo, hi = values.min(dim=0).values, values.max(dim=0).values
    assert ((out >= lo - 1e-9) & (out <= hi + 1e-9)).all()


def test_literal_mode_collapses_to_query():
    values = torch.randn(4, 6, dtype=torch.float64)
    query = torch.randn(6, dtype=torch.float64)
    out = attend(values, query, literal=True)
    assert torch.allclose(out, query, atol=1e-12)


# --------------------------------------------------------------- gate_fuse

def test_zero_gate_halves():
    h1, h2 = vec(2.0, 4.0), vec(0.0, 0.0)
    out = gate_fuse(h1, h2, vec(0.0, 0.0))
    assert torch.allclose(out, (h1 + h2) / 2, atol=1e-15)


def test_equal_inputs_any_gate():
    h = vec(1.0, -3.0, 2.5)
    out = gate_fuse(h, h, vec(4.0, -7.0, 0.1))
    assert torch.allclose(out, h, atol=1e-15)


def test_saturated_gate():
    out = gate_fuse(vec(1.0, 1.0), vec(0.0, 0.0), vec(20.0, -20.0))
    assert torch.allclose(out, vec(1.0, 0.0), atol=1e-8)


def test_output_between_inputs():
    g = torch.Generator().manual_seed(4)
    for _ in range(20):
        h1 = torch.randn(5, dtype=torch.float64, generator=g)
        h2 = torch.randn(5, dtype=torch.float64, generator=g)
        mu = torch.randn(5, dtype=torch.float64, generator=g)
        out = gate_fuse(h1, h2, mu)
        lo = torch.minimum(h1, h2)
        hi = torch.maximum(h1, h2)
        assert ((out >= lo - 1e-12) & (out <= hi + 1e-12)).all()


def test_linearity_in_inputs():
    g = torch.Generator().manual_seed(9)
    h1, h2, g1, g2, mu = (torch.randn(6, dtype=torch.float64, generator=g)
                          for _ in range(5))
    combined = gate_fuse(h1 + g1, h2 + g2, mu)
    separate = gate_fuse(h1, h2, mu) + gate_fuse(g1, g2, mu)
    assert torch.allclose(combined, separate, atol=1e-12)


def test_swap_inputs_negate_gate():
    g = torch.Generator().manual_seed(2)
    h1, h2, mu = (torch.randn(4, dtype=torch.float64, generator=g)
                  for _ in range(3))
    assert torch.allclose(gate_fuse(h1, h2, mu), gate_fuse(h2, h1, -mu),
                          atol=1e-12)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        gate_fuse(vec(1.0, 2.0), vec(1.0), vec(0.0, 0.0))


def test_mean_pool():
    values = torch.stack([vec(1.0, 3.0), vec(3.0, 5.0)])
    assert torch.allclose(mean_pool(values), vec(2.0, 4.0))
    with pytest.raises(ValueError):
        mean_pool(torch.zeros(0, 2, dtype=torch.float64))


def test_adaptive_gates_start_even():
    gates = AdaptiveGates(3)
    h1, h2 = vec(2.0, 0.0, 4.0), vec(0.0, 2.0, 0.0)
    assert torch.allclose(gates.fuse_trigger(h1, h2), (h1 + h2) / 2)
    assert torch.allclose(gates.fuse_knowledge(h1, h2), (h1 + h2) / 2)


# ---------------------------------------------------------------- gradients

def test_attend_gradients_match_finite_differences():
    g = torch.Generator().manual_seed(7)
    values = torch.randn(3, 4, dtype=torch.float64, generator=g).requires_grad_()
    query = torch.randn(4, dtype=torch.float64, generator=g).requires_grad_()
    weight = torch.randn(4, dtype=torch.float64, generator=g)

    out = (attend(values, query) * weight).sum()
    gv, gq = torch.autograd.grad(out, (values, query))
    with torch.no_grad():
        fv, fq = finite_diff(lambda: (attend(values, query) * weight).sum(),
                             [values.data, query.data])
    assert torch.allclose(gv, fv, atol=1e-7)
    assert torch.allclose(gq, fq, atol=1e-7)


def test_gate_gradients_match_finite_differences():
    g = torch.Generator().manual_seed(8)
    h1 = torch.randn(4, dtype=torch.float64, generator=g).requires_grad_()
    h2 = torch.randn(4, dtype=torch.float64, generator=g).requires_grad_()
    mu = torch.randn(4, dtype=torch.float64, generator=g).requires_grad_()

    out = (gate_fuse(h1, h2, mu) ** 2).sum()
    grads = torch.autograd.grad(out, (h1, h2, mu))
    with torch.no_grad():
        numeric = finite_diff(lambda: (gate_fuse(h1, h2, mu) ** 2).sum(),
                              [h1.data, h2.data, mu.data])
    for a, n in zip(grads, numeric):
        assert torch.allclose(a, n, atol=1e-7)
