//! Standard algebras and geometries, plus seeded random samples for
//! identity checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Algebra, AlgebraElement, AlgebraKind, AlgebraSpec, BasisMonomial, Derivation};
use crate::connections::Connection;
use crate::modules::{FrameSpec, Geometry, Slot, TensorField};
use crate::scalars::{GaussianRational, Series};
use crate::symmetry::TwistSpec;

fn coordinate_derivations(dim: usize, order: usize) -> Vec<Derivation> {
    (0..dim)
        .map(|j| {
            Derivation::Polynomial(
                (0..dim).map(|k| if j == k { AlgebraElement::one(dim, order) } else { AlgebraElement::zero(order) }).collect(),
            )
        })
        .collect()
}

fn torus_weights(dim: usize) -> Vec<Derivation> {
    (0..dim)
        .map(|j| Derivation::Torus((0..dim).map(|k| if j == k { GaussianRational::i() } else { GaussianRational::zero() }).collect()))
        .collect()
}

/// Polynomial algebra in `x1, x2` with `Z_j = ∂_j` and the Moyal twist `F⁻¹ = exp(h(Z1⊗Z2 − Z2⊗Z1))`.
pub fn moyal_algebra(order: usize) -> Algebra {
    let spec = AlgebraSpec { kind: AlgebraKind::Polynomial, dim: 2, generators: coordinate_derivations(2, order) };
    let twist = TwistSpec { generators: 2, pairs: vec![(0, 1, GaussianRational::one()), (1, 0, -GaussianRational::one())] };
    Algebra::new(spec, twist, order).expect("moyal algebra is valid")
}

/// Two-torus modes `U_k` with `Z_j U_k = i k_j U_k` and twist pairs `(1,2,c), (2,1,-c)`.
pub fn torus_algebra(order: usize, c: GaussianRational) -> Algebra {
    let spec = AlgebraSpec { kind: AlgebraKind::Torus, dim: 2, generators: torus_weights(2) };
    let twist = TwistSpec { generators: 2, pairs: vec![(0, 1, c.clone()), (1, 0, -c)] };
    Algebra::new(spec, twist, order).expect("torus algebra is valid")
}

/// Moyal plane with the coordinate frame `e_j = ∂_j`.
pub fn moyal_geometry(order: usize) -> Geometry {
    let alg = moyal_algebra(order);
    let frame = FrameSpec::coordinate(coordinate_derivations(2, order), 2, order);
    Geometry::new(alg, frame).expect("moyal geometry is valid")
}

/// Polynomial algebra in `x1, x2` with the trivial twist and the coordinate frame.
pub fn classical_geometry(order: usize) -> Geometry {
    let spec = AlgebraSpec { kind: AlgebraKind::Polynomial, dim: 2, generators: coordinate_derivations(2, order) };
    let alg = Algebra::new(spec, TwistSpec::trivial(2), order).expect("classical algebra is valid");
    let frame = FrameSpec::coordinate(coordinate_derivations(2, order), 2, order);
    Geometry::new(alg, frame).expect("classical geometry is valid")
}

/// Three-dimensional polynomial algebra twisted in the `(x1, x2)` plane, coordinate frame.
pub fn moyal3_geometry(order: usize) -> Geometry {
    let spec = AlgebraSpec { kind: AlgebraKind::Polynomial, dim: 3, generators: coordinate_derivations(3, order) };
    let twist = TwistSpec { generators: 3, pairs: vec![(0, 1, GaussianRational::one()), (1, 0, -GaussianRational::one())] };
    let alg = Algebra::new(spec, twist, order).expect("three-dimensional moyal algebra is valid");
    let frame = FrameSpec::coordinate(coordinate_derivations(3, order), 3, order);
    Geometry::new(alg, frame).expect("three-dimensional moyal geometry is valid")
}

/// Noncommutative torus with the frame `e_j = Z_j`.
pub fn torus_geometry(order: usize, c: GaussianRational) -> Geometry {
    let alg = torus_algebra(order, c);
    let frame = FrameSpec::coordinate(torus_weights(2), 2, order);
    Geometry::new(alg, frame).expect("torus geometry is valid")
}

/// Moyal plane with the non-invariant frame `E1 = ∂1 + x1 ∂2`, `E2 = ∂2`, on which
/// `Z1 ▷ e1 = e2`.
pub fn twisted_frame_geometry(order: usize) -> Geometry {
    let alg = moyal_algebra(order);
    let one = AlgebraElement::one(2, order);
    let x1 = alg.x(0);
    let derivations = vec![Derivation::Polynomial(vec![one.clone(), x1]), Derivation::Polynomial(vec![AlgebraElement::zero(order), one])];
    let mut frame = FrameSpec::coordinate(derivations, 2, order);
    frame.symmetry_action[0][0][1] = GaussianRational::one();
    Geometry::new(alg, frame).expect("twisted frame geometry is valid")
}

/// `s₁₁ = x₂ · e₁` (`U_{(0,1)} · e₁` on the torus), all other Christoffel data zero.
pub fn curvature_test_connection(geo: &Geometry) -> Connection {
    let mut c = Connection::zero(geo);
    let mut index = vec![0; geo.alg().dim()];
    index[1] = 1;
    let mut coeffs = vec![geo.alg().zero(); geo.rank()];
    coeffs[0] = geo.alg().monomial(index);
    c.set(0, 0, geo.vector_field(&coeffs));
    c
}

/// `s₁₂ = c · e₁`, all other Christoffel data zero.
pub fn torsion_test_connection(geo: &Geometry, c: GaussianRational) -> Connection {
    let mut conn = Connection::zero(geo);
    let mut coeffs = vec![geo.alg().zero(); geo.rank()];
    coeffs[0] = geo.alg().constant(c);
    conn.set(0, 1, geo.vector_field(&coeffs));
    conn
}

/// Seeded generator of small random elements, vector fields and forms.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
    /// Maximal total degree of sampled polynomial monomials.
    pub max_degree: i32,
    /// Maximal number of terms in a sampled element.
    pub max_terms: usize,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), max_degree: 2, max_terms: 3 }
    }

    fn coefficient(&mut self) -> GaussianRational {
        let n: i64 = self.rng.random_range(1..=3);
        if self.rng.random_bool(0.5) {
            GaussianRational::from_integer(n)
        } else {
            GaussianRational::from_integer(-n)
        }
    }

    fn series(&mut self, order: usize) -> Series {
        let mut coeffs = vec![GaussianRational::zero(); order + 1];
        coeffs[0] = self.coefficient();
        if order > 0 && self.rng.random_bool(0.3) {
            let k = self.rng.random_range(1..=order);
            coeffs[k] = self.coefficient();
        }
        Series::from_coeffs(coeffs, order)
    }

    fn monomial(&mut self, alg: &Algebra) -> BasisMonomial {
        let dim = alg.dim();
        match alg.kind() {
            AlgebraKind::Polynomial => {
                let total = self.rng.random_range(0..=self.max_degree);
                let mut m = vec![0; dim];
                for _ in 0..total {
                    let j = self.rng.random_range(0..dim);
                    m[j] += 1;
                }
                BasisMonomial(m)
            }
            AlgebraKind::Torus => BasisMonomial((0..dim).map(|_| self.rng.random_range(-1..=1)).collect()),
        }
    }

    /// A nonzero element with up to `max_terms` terms.
    pub fn element(&mut self, alg: &Algebra) -> AlgebraElement {
        loop {
            let mut out = alg.zero();
            let n = self.rng.random_range(1..=self.max_terms);
            for _ in 0..n {
                let m = self.monomial(alg);
                let c = self.series(alg.order());
                out.add_term(m, &c);
            }
            if !out.is_zero() {
                return out;
            }
        }
    }

    /// An element that is zero with probability one half.
    pub fn sparse_element(&mut self, alg: &Algebra) -> AlgebraElement {
        if self.rng.random_bool(0.5) {
            alg.zero()
        } else {
            self.element(alg)
        }
    }

    pub fn vector_field(&mut self, geo: &Geometry) -> TensorField {
        let coeffs: Vec<AlgebraElement> = (0..geo.rank()).map(|_| self.sparse_element(geo.alg())).collect();
        geo.vector_field(&coeffs)
    }

    /// A random covariant tensor of degree `p` (not necessarily antisymmetric).
    pub fn covariant(&mut self, geo: &Geometry, p: usize) -> TensorField {
        let mut t = geo.zero(vec![Slot::Form; p]);
        for idx in geo.frame_words(p) {
            if self.rng.random_bool(0.6) {
                let a = self.element(geo.alg());
                t.add_term(idx, &a);
            }
        }
        t
    }

    pub fn one_form(&mut self, geo: &Geometry) -> TensorField {
        self.covariant(geo, 1)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_is_deterministic() {
        let alg = moyal_algebra(2);
        let a: Vec<_> = {
            let mut s = Sampler::new(7);
            (0..5).map(|_| s.element(&alg)).collect()
        };
        let b: Vec<_> = {
            let mut s = Sampler::new(7);
            (0..5).map(|_| s.element(&alg)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn standard_geometries_build() {
        assert!(moyal_geometry(2).is_invariant());
        assert!(torus_geometry(2, GaussianRational::from_ratio(1, 2)).is_invariant());
        assert!(!twisted_frame_geometry(2).is_invariant());
    }
}
