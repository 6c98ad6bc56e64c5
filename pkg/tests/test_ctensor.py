import numpy as np
import pytest

from polsar_gan.ctensor import (
    ComplexScalar,
    ComplexTensor,
    cadd,
    cmul,
    complex_matmul,
    concat_real_imag,
    concatenate,
    csub,
    scale,
    split_real_imag,
    tensor_ewise,
)
from polsar_gan.errors import ShapeMismatchError


def test_scalar_rules():
    assert cmul(ComplexScalar(1, 2), ComplexScalar(3, -1)) == ComplexScalar(5, 5)
    assert cmul(ComplexScalar(0, 1), ComplexScalar(0, 1)) == ComplexScalar(-1, 0)
    assert cadd(ComplexScalar(1, 2), ComplexScalar(3, -1)) == ComplexScalar(4, 1)
    assert csub(ComplexScalar(1, 2), ComplexScalar(3, -1)) == ComplexScalar(-2, 3)
    assert ComplexScalar(3, 4).modulus() == pytest.approx(5.0)


def _random_scalar(rng):
    return ComplexScalar(float(rng.normal()), float(rng.normal()))


def _close(a, b):
    return abs(complex(a.re, a.im) - complex(b.re, b.im)) < 1e-12


def test_scalar_algebra_laws(rng):
    for _ in range(500):
        x, y, z = (_random_scalar(rng) for _ in range(3))
        assert _close(cmul(x, y), cmul(y, x))
        assert _close(cmul(cmul(x, y), z), cmul(x, cmul(y, z)))
        assert _close(cmul(x, cadd(y, z)), cadd(cmul(x, y), cmul(x, z)))
        assert abs(cmul(x, y).modulus() - x.modulus() * y.modulus()) < 1e-12


def test_planes_must_share_shape():
    with pytest.raises(ShapeMismatchError):
        ComplexTensor(np.zeros((2, 3)), np.zeros((3, 2)))


def test_ewise_matches_numpy(rng, random_complex):
    a = random_complex(rng, (4, 5))
    b = random_complex(rng, (4, 5))
    za, zb = a.to_complex(), b.to_complex()
    np.testing.assert_allclose(tensor_ewise("add", a, b).to_complex(), za + zb, atol=1e-12)
    np.testing.assert_allclose(tensor_ewise("sub", a, b).to_complex(), za - zb, atol=1e-12)
    np.testing.assert_allclose(tensor_ewise("mul", a, b).to_complex(), za * zb, atol=1e-12)
    np.testing.assert_allclose((a * b).to_complex(), za * zb, atol=1e-12)


def test_ewise_shape_error_names_both_shapes(rng, random_complex):
    a = random_complex(rng, (2, 3))
    b = random_complex(rng, (3, 2))
    with pytest.raises(ShapeMismatchError, match=r"\(2, 3\).*\(3, 2\)"):
        tensor_ewise("add", a, b)


def test_operations_do_not_mutate_inputs(rng, random_complex):
    a = random_complex(rng, (3, 3))
    before = (a.re.copy(), a.im.copy())
    _ = tensor_ewise("mul", a, a)
    _ = a.conj()
    _ = -a
    np.testing.assert_array_equal(a.re, before[0])
    np.testing.assert_array_equal(a.im, before[1])


def test_scale_by_scalar(rng, random_complex):
    x = random_complex(rng, (2, 4))
    z = ComplexScalar(0.5, -2.0)
    np.testing.assert_allclose(scale(x, z).to_complex(), x.to_complex() * (0.5 - 2j), atol=1e-12)
    np.testing.assert_allclose((x * z).to_complex(), x.to_complex() * (0.5 - 2j), atol=1e-12)


def _loop_matmul(A, B):
    n, k = A.shape
    m    = B.shape[1]
    out  = np.zeros((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            acc = 0j
            for t in range(k):
                acc += complex(A[i, t]) * complex(B[t, j])
            out[i, j] = acc
    return out


def test_matmul_matches_scalar_loop_oracle(rng, random_complex):
    for _ in range(100):
        n, k, m = rng.integers(1, 5, size=3)
        a = random_complex(rng, (n, k))
        b = random_complex(rng, (k, m))
        got = complex_matmul(a, b).to_complex()
        np.testing.assert_allclose(got, _loop_matmul(a.to_complex(), b.to_complex()),
                                   rtol=0, atol=1e-12)


def test_matmul_identity(rng, random_complex):
    a  = random_complex(rng, (3, 3))
    eye = ComplexTensor(np.eye(3), np.zeros((3, 3)))
    np.testing.assert_allclose(complex_matmul(a, eye).to_complex(), a.to_complex(), atol=1e-15)


def test_matmul_shape_errors(rng, random_complex):
    with pytest.raises(ShapeMismatchError):
        complex_matmul(random_complex(rng, (2, 3)), random_complex(rng, (2, 3)))
    with pytest.raises(ShapeMismatchError):
        complex_matmul(random_complex(rng, (2, 3, 1)), random_complex(rng, (3, 2)))


def test_concat_real_imag():
    x = ComplexTensor(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_array_equal(concat_real_imag(x), [1.0, 2.0, 3.0, 4.0])
    s = ComplexTensor(np.array(1.5), np.array(-0.5))
    np.testing.assert_array_equal(concat_real_imag(s), [1.5, -0.5])


def test_split_inverts_concat(rng, random_complex):
    x = random_complex(rng, (3, 5))
    y = split_real_imag(concat_real_imag(x))
    np.testing.assert_array_equal(y.re, x.re)
    np.testing.assert_array_equal(y.im, x.im)
    with pytest.raises(ShapeMismatchError):
        split_real_imag(np.zeros((2, 3)))


def test_reshape_and_concatenate(rng, random_complex):
    x = random_complex(rng, (2, 6))
    assert x.reshape(2, 2, 3).shape == (2, 2, 3)
    assert x.reshape((12,)).shape == (12,)
    with pytest.raises(ShapeMismatchError):
        x.reshape(5, 5)
    both = concatenate([x, x])
    assert both.shape == (4, 6)
    np.testing.assert_array_equal(both.im[2:], x.im)


def test_constructors():
    z = ComplexTensor.from_complex(np.array([1 + 2j, -3j]))
    np.testing.assert_array_equal(z.re, [1.0, 0.0])
    np.testing.assert_array_equal(z.im, [2.0, -3.0])
    one = ComplexTensor.ones((2,))
    np.testing.assert_array_equal(one.to_complex(), [1 + 0j, 1 + 0j])
    assert ComplexTensor.zeros((3, 1), dtype=np.float32).dtype == np.float32
