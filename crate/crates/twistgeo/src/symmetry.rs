//! Abelian symmetry algebra: commutative words in primitive generators,
//! exponential twists and the triangular R-matrix they induce.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalars::{binomial, inv_factorial, GaussianRational, Series};

/// A monomial `Z_1^{e_1} … Z_m^{e_m}` in the universal envelope of an abelian Lie algebra.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymmetryWord(pub Vec<u32>);

impl SymmetryWord {
    pub fn one(m: usize) -> Self {
        Self(vec![0; m])
    }

    /// The single generator `Z_a` (0-based).
    pub fn generator(a: usize, m: usize) -> Self {
        let mut w = Self::one(m);
        w.0[a] = 1;
        w
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }

    /// Multinomial coproduct `Δ(w) = Σ c · w' ⊗ w''`.
    pub fn coproduct(&self) -> Vec<(SymmetryWord, SymmetryWord, GaussianRational)> {
        let mut out = vec![(Vec::new(), Vec::new(), GaussianRational::one())];
        for &e in &self.0 {
            let mut next = Vec::new();
            for (l, r, c) in &out {
                for j in 0..=e {
                    let mut l2: Vec<u32> = l.clone();
                    let mut r2: Vec<u32> = r.clone();
                    l2.push(j);
                    r2.push(e - j);
                    next.push((l2, r2, c * &binomial(e, j)));
                }
            }
            out = next;
        }
        out.into_iter().map(|(l, r, c)| (Self(l), Self(r), c)).collect()
    }

    /// Sign of the antipode: `S(w) = (-1)^{deg w} w`.
    pub fn antipode_sign(&self) -> i64 {
        if self.degree().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

/// Coefficients of `Δ(w)(id ⊗ S)`, returned as `(outer, inner, c)` so that
/// `w ▷ L = Σ c · outer ▷ ∘ L ∘ inner ▷`.
///
/// The symmetry algebra is cocommutative with `S = S⁻¹`, so the same list also
/// realizes the `▷^cop` action `ξ₍₂₎ ▷ ∘ L ∘ S⁻¹(ξ₍₁₎) ▷`.
pub fn adjoint_coefficients(word: &SymmetryWord) -> Vec<(SymmetryWord, SymmetryWord, GaussianRational)> {
    word.coproduct()
        .into_iter()
        .map(|(l, r, c)| {
            let c = if r.antipode_sign() < 0 { -c } else { c };
            (l, r, c)
        })
        .collect()
}

/// Twist data: `F⁻¹ = exp(h Σ c · Z_a ⊗ Z_b)` over `generators` generators (0-based indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistSpec {
    pub generators: usize,
    pub pairs: Vec<(usize, usize, GaussianRational)>,
}

impl TwistSpec {
    pub fn trivial(generators: usize) -> Self {
        Self { generators, pairs: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for &(a, b, _) in &self.pairs {
            for idx in [a, b] {
                if idx >= self.generators {
                    return Err(Error::InvalidGenerator { index: idx + 1, count: self.generators });
                }
            }
        }
        Ok(())
    }
}

/// A Series-weighted sum of pure tensors `w ⊗ w'` of symmetry words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorTensor {
    generators: usize,
    order: usize,
    terms: BTreeMap<(SymmetryWord, SymmetryWord), Series>,
}

impl OperatorTensor {
    pub fn zero(generators: usize, order: usize) -> Self {
        Self { generators, order, terms: BTreeMap::new() }
    }

    pub fn identity(generators: usize, order: usize) -> Self {
        let mut t = Self::zero(generators, order);
        t.add_term(SymmetryWord::one(generators), SymmetryWord::one(generators), Series::one(order));
        t
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SymmetryWord, &SymmetryWord, &Series)> {
        self.terms.iter().map(|((l, r), c)| (l, r, c))
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

    pub fn add_term(&mut self, l: SymmetryWord, r: SymmetryWord, c: Series) {
        let key = (l, r);
        let entry = self.terms.entry(key.clone()).or_insert_with(|| Series::zero(self.order));
        *entry += &c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn check(&self, rhs: &Self) -> Result<()> {
        if self.order != rhs.order {
            return Err(Error::OrderMismatch(self.order, rhs.order));
        }
        if self.generators != rhs.generators {
            return Err(Error::ContextMismatch("operator tensors over different symmetry algebras".into()));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let mut out = self.clone();
        for (l, r, c) in rhs.terms() {
            out.add_term(l.clone(), r.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let mut out = self.clone();
        for (l, r, c) in rhs.terms() {
            out.add_term(l.clone(), r.clone(), -c);
        }
        Ok(out)
    }

    /// Leg-wise product `(a ⊗ b)(c ⊗ d) = ac ⊗ bd`.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let mut out = Self::zero(self.generators, self.order);
        for (l1, r1, c1) in self.terms() {
            for (l2, r2, c2) in rhs.terms() {
                let c = c1 * c2;
                if !c.is_zero() {
                    out.add_term(l1.mul(l2), r1.mul(r2), c);
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Series) -> Self {
        let mut out = Self::zero(self.generators, self.order);
        for (l, r, s) in self.terms() {
            out.add_term(l.clone(), r.clone(), s * c);
        }
        out
    }

    /// Swaps the two legs.
    pub fn flip(&self) -> Self {
        let mut out = Self::zero(self.generators, self.order);
        for (l, r, c) in self.terms() {
            out.add_term(r.clone(), l.clone(), c.clone());
        }
        out
    }

    /// `(ε ⊗ id)T`: the right legs of the terms whose left leg is the unit.
    pub fn counit_left(&self) -> BTreeMap<SymmetryWord, Series> {
        let mut out = BTreeMap::new();
        for (l, r, c) in self.terms() {
            if l.is_one() {
                out.insert(r.clone(), c.clone());
            }
        }
        out
    }

    /// `(id ⊗ ε)T`.
    pub fn counit_right(&self) -> BTreeMap<SymmetryWord, Series> {
        self.flip().counit_left()
    }

    /// Truncated exponential of `h·X` for an `X` without constant part.
    pub fn exp_h(x: &Self) -> Result<Self> {
        let h = Series::monomial(GaussianRational::one(), 1, x.order);
        let hx = x.scale(&h);
        let mut term = Self::identity(x.generators, x.order);
        let mut sum = term.clone();
        for k in 1..=x.order as u32 {
            term = term.mul(&hx)?;
            sum = sum.add(&term.scale(&Series::constant(inv_factorial(k), x.order)))?;
        }
        Ok(sum)
    }
}

/// The bilinear exponent `Σ c · Z_a ⊗ Z_b` of a twist.
fn twist_exponent(spec: &TwistSpec, order: usize) -> OperatorTensor {
    let m = spec.generators;
    let mut x = OperatorTensor::zero(m, order);
    for (a, b, c) in &spec.pairs {
        x.add_term(SymmetryWord::generator(*a, m), SymmetryWord::generator(*b, m), Series::constant(c.clone(), order));
    }
    x
}

/// Builds `(F, F⁻¹)` with `F⁻¹ = exp(h Σ c Z_a ⊗ Z_b)` truncated at `order`.
pub fn build_twist(spec: &TwistSpec, order: usize) -> Result<(OperatorTensor, OperatorTensor)> {
    spec.validate()?;
    let x = twist_exponent(spec, order);
    let minus_one = Series::constant(-GaussianRational::one(), order);
    let f_inv = OperatorTensor::exp_h(&x)?;
    let f = OperatorTensor::exp_h(&x.scale(&minus_one))?;
    Ok((f, f_inv))
}

/// Builds `(R, R⁻¹)` with `R = F₂₁ F⁻¹` and `R⁻¹ = R₂₁`.
pub fn build_r_matrix(f: &OperatorTensor, f_inv: &OperatorTensor) -> Result<(OperatorTensor, OperatorTensor)> {
    let r = f.flip().mul(f_inv)?;
    let r_inv = r.flip();
    Ok((r, r_inv))
}

/// Applies each term of `t` leg-wise: `Σ c · (w ▷ x, w' ▷ y)`.
pub fn act_legwise<X, Y, E>(
    t: &OperatorTensor,
    x: &X,
    y: &Y,
    mut act_l: impl FnMut(&SymmetryWord, &X) -> std::result::Result<X, E>,
    mut act_r: impl FnMut(&SymmetryWord, &Y) -> std::result::Result<Y, E>,
) -> std::result::Result<Vec<(Series, X, Y)>, E> {
    t.terms().map(|(l, r, c)| Ok((c.clone(), act_l(l, x)?, act_r(r, y)?))).collect()
}

/// A Series-weighted sum of triple tensors of words, used for the cocycle check.
pub type Tensor3 = BTreeMap<(SymmetryWord, SymmetryWord, SymmetryWord), Series>;

fn add3(t: &mut Tensor3, key: (SymmetryWord, SymmetryWord, SymmetryWord), c: Series) {
    let entry = t.entry(key.clone()).or_insert_with(|| Series::zero(c.order()));
    *entry += &c;
    if entry.is_zero() {
        t.remove(&key);
    }
}

fn mul3(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let mut out = Tensor3::new();
    for ((a1, a2, a3), ca) in a {
        for ((b1, b2, b3), cb) in b {
            add3(&mut out, (a1.mul(b1), a2.mul(b2), a3.mul(b3)), ca * cb);
        }
    }
    out
}

/// `(F⊗1)(Δ⊗id)F − (1⊗F)(id⊗Δ)F`, which must vanish for a twist.
pub fn cocycle_residual(f: &OperatorTensor) -> Tensor3 {
    let m = f.generators();
    let one = SymmetryWord::one(m);
    let mut f12 = Tensor3::new();
    let mut f23 = Tensor3::new();
    let mut delta_left = Tensor3::new();
    let mut delta_right = Tensor3::new();
    for (l, r, c) in f.terms() {
        add3(&mut f12, (l.clone(), r.clone(), one.clone()), c.clone());
        add3(&mut f23, (one.clone(), l.clone(), r.clone()), c.clone());
        for (l1, l2, k) in l.coproduct() {
            add3(&mut delta_left, (l1, l2, r.clone()), c.scale(&k));
        }
        for (r1, r2, k) in r.coproduct() {
            add3(&mut delta_right, (l.clone(), r1, r2), c.scale(&k));
        }
    }
    let lhs = mul3(&f12, &delta_left);
    let rhs = mul3(&f23, &delta_right);
    let mut out = lhs;
    for (k, c) in rhs {
        add3(&mut out, k, -&c);
    }
    out
}

/// Term counts of the twist and R-matrix law residuals; all zero for a valid twist.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TwistLaws {
    /// Cocycle residuals of `F` and `F⁻¹`.
    pub cocycle: usize,
    /// `(ε⊗id)F − 1` and `(id⊗ε)F − 1`.
    pub normalization: usize,
    /// `F F⁻¹ − 1⊗1` and `F⁻¹ F − 1⊗1`.
    pub inverse: usize,
    /// `R₂₁ R − 1⊗1`.
    pub triangular: usize,
}

impl TwistLaws {
    pub fn is_exact(&self) -> bool {
        *self == Self::default()
    }
}

fn counit_defect(map: BTreeMap<SymmetryWord, Series>, generators: usize, order: usize) -> usize {
    let one = SymmetryWord::one(generators);
    map.into_iter().filter(|(w, c)| if *w == one { c != &Series::one(order) } else { !c.is_zero() }).count()
}

/// Evaluates every twist law for `(F, F⁻¹, R)`.
pub fn twist_laws(f: &OperatorTensor, f_inv: &OperatorTensor, r: &OperatorTensor) -> Result<TwistLaws> {
    let (m, n) = (f.generators(), f.order());
    let id = OperatorTensor::identity(m, n);
    let left = f.counit_left();
    let right = f.counit_right();
    let missing = usize::from(!left.contains_key(&SymmetryWord::one(m))) + usize::from(!right.contains_key(&SymmetryWord::one(m)));
    Ok(TwistLaws {
        cocycle: cocycle_residual(f).len() + cocycle_residual(f_inv).len(),
        normalization: counit_defect(left, m, n) + counit_defect(right, m, n) + missing,
        inverse: f.mul(f_inv)?.sub(&id)?.len() + f_inv.mul(f)?.sub(&id)?.len(),
        triangular: r.flip().mul(r)?.sub(&id)?.len(),
    })
}
