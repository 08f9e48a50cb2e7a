//! The braided-commutative algebra `A`: elements in the classical basis with
//! Series coefficients, generator actions, and the twisted star product.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalars::{GaussianRational, Series};
use crate::symmetry::{build_r_matrix, build_twist, OperatorTensor, SymmetryWord, TwistSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgebraKind {
    /// Polynomials in `x_1 … x_n`.
    Polynomial,
    /// Laurent modes `U_k`, `k ∈ ℤⁿ`, with `U_k U_l = U_{k+l}`.
    Torus,
}

/// A classical basis element: `x^e` (exponents ≥ 0) or `U_k`.
///
/// Classical products add the index vectors in both cases.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisMonomial(pub Vec<i32>);

impl BasisMonomial {
    pub fn one(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn unit_vector(j: usize, dim: usize) -> Self {
        let mut m = Self::one(dim);
        m.0[j] = 1;
        m
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }

    /// Total degree, using absolute values for torus modes.
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|e| e.unsigned_abs()).sum()
    }
}

/// A finite sum `Σ c_m · m` over classical basis monomials.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlgebraElement {
    order: usize,
    terms: BTreeMap<BasisMonomial, Series>,
}

impl AlgebraElement {
    pub fn zero(order: usize) -> Self {
        Self { order, terms: BTreeMap::new() }
    }

    pub fn constant(c: Series, dim: usize) -> Self {
        Self::term(BasisMonomial::one(dim), c)
    }

    pub fn one(dim: usize, order: usize) -> Self {
        Self::constant(Series::one(order), dim)
    }

    pub fn term(m: BasisMonomial, c: Series) -> Self {
        let mut out = Self::zero(c.order());
        out.add_term(m, &c);
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisMonomial, &Series)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &BasisMonomial) -> Series {
        self.terms.get(m).cloned().unwrap_or_else(|| Series::zero(self.order))
    }

    /// True when the element is `c · 1` for a Series `c`.
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(BasisMonomial::is_one)
    }

    /// The coefficient of the unit monomial.
    pub fn constant_part(&self) -> Series {
        self.terms.iter().find(|(m, _)| m.is_one()).map(|(_, c)| c.clone()).unwrap_or_else(|| Series::zero(self.order))
    }

    pub fn add_term(&mut self, m: BasisMonomial, c: &Series) {
        assert_eq!(self.order, c.order(), "series order mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(entry) => {
                *entry += c;
                if entry.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c.clone());
            }
        }
    }

    pub fn add_assign(&mut self, rhs: &Self) {
        for (m, c) in rhs.terms() {
            self.add_term(m.clone(), c);
        }
    }

    pub fn sub_assign(&mut self, rhs: &Self) {
        for (m, c) in rhs.terms() {
            self.add_term(m.clone(), &-c);
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        out.sub_assign(rhs);
        out
    }

    pub fn neg(&self) -> Self {
        Self { order: self.order, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &Series) -> Self {
        let mut out = Self::zero(self.order);
        for (m, a) in self.terms() {
            out.add_term(m.clone(), &(a * c));
        }
        out
    }

    pub fn scale_scalar(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.order);
        }
        Self { order: self.order, terms: self.terms.iter().map(|(m, a)| (m.clone(), a.scale(c))).collect() }
    }

    /// The undeformed commutative product.
    pub fn classical_mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zero(self.order);
        for (m1, c1) in self.terms() {
            for (m2, c2) in rhs.terms() {
                out.add_term(m1.mul(m2), &(c1 * c2));
            }
        }
        out
    }

    /// Highest total degree of a monomial present.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(BasisMonomial::degree).max().unwrap_or(0)
    }
}

/// A classical derivation of the commutative algebra, given by its values on
/// the generators `x_j` (polynomial) or by weights `w_j` with `D(U_k) = (Σ w_j k_j) U_k` (torus).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    Polynomial(Vec<AlgebraElement>),
    Torus(Vec<GaussianRational>),
}

impl Derivation {
    pub fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        let mut out = AlgebraElement::zero(a.order());
        match self {
            Derivation::Polynomial(values) => {
                for (m, c) in a.terms() {
                    for (j, &e) in m.0.iter().enumerate() {
                        if e == 0 || values[j].is_zero() {
                            continue;
                        }
                        let mut lower = m.clone();
                        lower.0[j] -= 1;
                        let coeff = c.scale(&GaussianRational::from_integer(e as i64));
                        out.add_assign(&values[j].classical_mul(&AlgebraElement::term(lower, coeff)));
                    }
                }
            }
            Derivation::Torus(weights) => {
                for (m, c) in a.terms() {
                    let mut eig = GaussianRational::zero();
                    for (w, &k) in weights.iter().zip(&m.0) {
                        eig += &(w * &GaussianRational::from_integer(k as i64));
                    }
                    out.add_term(m.clone(), &c.scale(&eig));
                }
            }
        }
        out
    }

    /// True when the derivation has value zero on every generator.
    pub fn is_zero(&self) -> bool {
        match self {
            Derivation::Polynomial(v) => v.iter().all(AlgebraElement::is_zero),
            Derivation::Torus(w) => w.iter().all(GaussianRational::is_zero),
        }
    }
}

/// The presentation of `A`: kind, dimension and symmetry generator actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraSpec {
    pub kind: AlgebraKind,
    pub dim: usize,
    pub generators: Vec<Derivation>,
}

impl AlgebraSpec {
    /// Test elements used to check that derivations agree: generators for
    /// polynomials, unit modes for tori.
    pub fn probe_elements(&self, order: usize) -> Vec<AlgebraElement> {
        (0..self.dim).map(|j| AlgebraElement::term(BasisMonomial::unit_vector(j, self.dim), Series::one(order))).collect()
    }

    /// Checks that two derivations act identically (both are determined by generators).
    pub fn derivations_agree(
        &self,
        d1: &dyn Fn(&AlgebraElement) -> AlgebraElement,
        d2: &dyn Fn(&AlgebraElement) -> AlgebraElement,
        order: usize,
    ) -> bool {
        self.probe_elements(order).iter().all(|x| d1(x) == d2(x))
    }
}

/// An algebra context: presentation, truncation order, and twist data.
#[derive(Clone, Debug)]
pub struct Algebra {
    spec: AlgebraSpec,
    order: usize,
    twist: TwistSpec,
    f: OperatorTensor,
    f_inv: OperatorTensor,
    r: OperatorTensor,
    r_inv: OperatorTensor,
}

impl Algebra {
    pub fn new(spec: AlgebraSpec, twist: TwistSpec, order: usize) -> Result<Self> {
        if twist.generators != spec.generators.len() {
            return Err(Error::InvalidGeometry(format!(
                "twist refers to {} generators but the algebra declares {}",
                twist.generators,
                spec.generators.len()
            )));
        }
        for g in &spec.generators {
            let ok = match (spec.kind, g) {
                (AlgebraKind::Polynomial, Derivation::Polynomial(v)) => {
                    v.len() == spec.dim
                        && v.iter()
                            .all(|x| x.order() == order && x.terms().all(|(m, _)| m.0.len() == spec.dim && m.0.iter().all(|&e| e >= 0)))
                }
                (AlgebraKind::Torus, Derivation::Torus(w)) => w.len() == spec.dim,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidGeometry("generator action does not match the algebra kind or dimension".into()));
            }
        }
        let (f, f_inv) = build_twist(&twist, order)?;
        let (r, r_inv) = build_r_matrix(&f, &f_inv)?;
        let alg = Self { spec, order, twist, f, f_inv, r, r_inv };
        for a in 0..alg.generator_count() {
            for b in 0..a {
                let ab = |x: &AlgebraElement| alg.act_generator(a, &alg.act_generator(b, x));
                let ba = |x: &AlgebraElement| alg.act_generator(b, &alg.act_generator(a, x));
                if !alg.spec.derivations_agree(&ab, &ba, order) {
                    return Err(Error::InvalidGeometry(format!("symmetry generators Z[{}] and Z[{}] do not commute", b + 1, a + 1)));
                }
            }
        }
        Ok(alg)
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn kind(&self) -> AlgebraKind {
        self.spec.kind
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn generator_count(&self) -> usize {
        self.spec.generators.len()
    }

    pub fn twist_spec(&self) -> &TwistSpec {
        &self.twist
    }

    pub fn twist(&self) -> &OperatorTensor {
        &self.f
    }

    pub fn twist_inv(&self) -> &OperatorTensor {
        &self.f_inv
    }

    pub fn r_matrix(&self) -> &OperatorTensor {
        &self.r
    }

    /// `R̄ = R⁻¹`, whose legs act in every braiding.
    pub fn r_inv(&self) -> &OperatorTensor {
        &self.r_inv
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement::zero(self.order)
    }

    pub fn one(&self) -> AlgebraElement {
        AlgebraElement::one(self.dim(), self.order)
    }

    pub fn constant(&self, c: GaussianRational) -> AlgebraElement {
        AlgebraElement::constant(Series::constant(c, self.order), self.dim())
    }

    pub fn series(&self, c: Series) -> AlgebraElement {
        AlgebraElement::constant(c, self.dim())
    }

    /// `h` as an algebra element.
    pub fn h(&self) -> AlgebraElement {
        self.series(Series::monomial(GaussianRational::one(), 1, self.order))
    }

    pub fn monomial(&self, index: Vec<i32>) -> AlgebraElement {
        assert_eq!(index.len(), self.dim(), "monomial index length must equal the algebra dimension");
        AlgebraElement::term(BasisMonomial(index), Series::one(self.order))
    }

    /// The coordinate generator `x_j` (0-based) of a polynomial algebra.
    pub fn x(&self, j: usize) -> AlgebraElement {
        AlgebraElement::term(BasisMonomial::unit_vector(j, self.dim()), Series::one(self.order))
    }

    pub fn check_element(&self, a: &AlgebraElement) -> Result<()> {
        if a.order() != self.order {
            return Err(Error::OrderMismatch(a.order(), self.order));
        }
        for (m, _) in a.terms() {
            if m.0.len() != self.dim() || (self.kind() == AlgebraKind::Polynomial && m.0.iter().any(|&e| e < 0)) {
                return Err(Error::ContextMismatch("element does not belong to this algebra".into()));
            }
        }
        Ok(())
    }

    pub fn classical_mul(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_element(a)?;
        self.check_element(b)?;
        Ok(a.classical_mul(b))
    }

    /// Action of the single generator `Z_g` (0-based).
    pub fn act_generator(&self, g: usize, a: &AlgebraElement) -> AlgebraElement {
        self.spec.generators[g].apply(a)
    }

    /// Iterated action of a symmetry word.
    pub fn h_act(&self, word: &SymmetryWord, a: &AlgebraElement) -> AlgebraElement {
        let mut out = a.clone();
        for (g, &e) in word.exponents().iter().enumerate() {
            for _ in 0..e {
                if out.is_zero() {
                    return out;
                }
                out = self.act_generator(g, &out);
            }
        }
        out
    }

    /// Applies an operator tensor leg-wise to `(a, b)` and multiplies classically.
    fn mul_with(&self, t: &OperatorTensor, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        let mut left_cache: BTreeMap<&SymmetryWord, AlgebraElement> = BTreeMap::new();
        let mut out = self.zero();
        for (wl, wr, c) in t.terms() {
            let la = left_cache.entry(wl).or_insert_with(|| self.h_act(wl, a));
            if la.is_zero() {
                continue;
            }
            let rb = self.h_act(wr, b);
            if rb.is_zero() {
                continue;
            }
            out.add_assign(&la.classical_mul(&rb).scale(c));
        }
        out
    }

    /// The star product `a ⋆ b = μ(F⁻¹ ▷ (a ⊗ b))`.
    pub fn star(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        if a.is_zero() || b.is_zero() {
            return self.zero();
        }
        if a.is_constant() {
            return b.scale(&a.constant_part());
        }
        if b.is_constant() {
            return a.scale(&b.constant_part());
        }
        self.mul_with(&self.f_inv, a, b)
    }

    pub fn try_star(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_element(a)?;
        self.check_element(b)?;
        Ok(self.star(a, b))
    }

    /// `(R̄^α ▷ b) ⋆ (R̄_α ▷ a)`.
    pub fn braided_star(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        let mut out = self.zero();
        for (wl, wr, c) in self.r_inv.terms() {
            let lb = self.h_act(wl, b);
            if lb.is_zero() {
                continue;
            }
            let ra = self.h_act(wr, a);
            if ra.is_zero() {
                continue;
            }
            out.add_assign(&self.star(&lb, &ra).scale(c));
        }
        out
    }

    /// Braiding of `a ⊗ b` in `A ⊗ A`: `Σ (R̄^α ▷ b) ⊗ (R̄_α ▷ a)`, collected on basis pairs.
    pub fn braid_elements(&self, a: &AlgebraElement, b: &AlgebraElement) -> BTreeMap<(BasisMonomial, BasisMonomial), Series> {
        let mut out: BTreeMap<(BasisMonomial, BasisMonomial), Series> = BTreeMap::new();
        for (wl, wr, c) in self.r_inv.terms() {
            let lb = self.h_act(wl, b);
            let ra = self.h_act(wr, a);
            for (m1, c1) in lb.terms() {
                for (m2, c2) in ra.terms() {
                    let v = &(c1 * c2) * c;
                    let entry = out.entry((m1.clone(), m2.clone())).or_insert_with(|| Series::zero(self.order));
                    *entry += &v;
                }
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }

    /// `a ⋆ b − (R̄^α ▷ b) ⋆ (R̄_α ▷ a)`; zero for a braided commutative algebra.
    pub fn check_braided_commutativity(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        self.star(a, b).sub(&self.braided_star(a, b))
    }

    /// `a^k` with the star product.
    pub fn star_pow(&self, a: &AlgebraElement, k: u32) -> AlgebraElement {
        let mut out = self.one();
        for _ in 0..k {
            out = self.star(&out, a);
        }
        out
    }
}
