//! Braided Cartan calculus: wedge product, exterior derivative, braided Lie
//! bracket, Lie derivative, and the residual suite for the six graded
//! braided commutator relations.

use std::collections::BTreeMap;

use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::modules::{Geometry, Slot, TensorField};
use crate::sampling::Sampler;
use crate::scalars::{inv_factorial, GaussianRational};

impl Geometry {
    /// Applies `Σ_σ sgn(σ) τ_σ` over the `(p, q)`-shuffles of the two leading blocks.
    fn shuffle_sum(&self, t: &TensorField, p: usize, q: usize) -> Result<TensorField> {
        let n = p + q;
        let mut out = self.zero(t.sig().to_vec());
        for first in subsets(n, p) {
            // Slot `k` moves to position `arrangement[k]`; blocks keep their internal order.
            let others: Vec<usize> = (0..n).filter(|x| !first.contains(x)).collect();
            let mut arrangement: Vec<usize> = first.iter().chain(&others).copied().collect();
            let mut cur = t.clone();
            let mut sign = false;
            // Bubble sort by target position, braiding at every adjacent swap.
            loop {
                let mut swapped = false;
                for k in 0..n.saturating_sub(1) {
                    if arrangement[k] > arrangement[k + 1] {
                        cur = self.braid(&cur, k)?;
                        arrangement.swap(k, k + 1);
                        sign = !sign;
                        swapped = true;
                    }
                }
                if !swapped {
                    break;
                }
            }
            if sign {
                out.sub_assign(&cur);
            } else {
                out.add_assign(&cur);
            }
        }
        Ok(out)
    }

    /// `θ ∧ θ' = Σ_{shuffles σ} sgn(σ) τ_σ(θ ⊗ θ')` for forms given as
    /// braided-antisymmetric covariant tensors.
    pub fn wedge(&self, a: &TensorField, b: &TensorField) -> Result<TensorField> {
        for x in [a, b] {
            if x.q() != 0 {
                return Err(Error::Degree("wedge expects differential forms".into()));
            }
        }
        let joined = self.concat(a, b);
        if a.is_empty() || b.is_empty() {
            return Ok(joined);
        }
        self.shuffle_sum(&joined, a.len(), b.len())
    }

    /// `ω^{i_1} ∧ … ∧ ω^{i_p}`.
    pub fn wedge_frame(&self, idx: &[u8]) -> Result<TensorField> {
        let mut out = self.function(&self.alg().one());
        for &i in idx.iter().rev() {
            out = self.wedge(&self.w(i as usize), &out)?;
        }
        Ok(out)
    }

    /// True when `τ_k(t) = −t` at every adjacent slot pair.
    pub fn is_braided_antisymmetric(&self, t: &TensorField) -> Result<bool> {
        for k in 0..t.len().saturating_sub(1) {
            if self.braid(t, k)? != t.neg() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Exterior derivative on forms of any degree up to the frame rank.
    pub fn ext_d(&self, t: &TensorField) -> Result<TensorField> {
        let p = t.len();
        if t.q() != 0 {
            return Err(Error::Degree("exterior derivative expects a differential form".into()));
        }
        if p > self.rank() {
            return Err(Error::Degree(format!("form degree {p} exceeds the frame rank {}", self.rank())));
        }
        match p {
            0 => Ok(self.d_function(&self.scalar_part(t))),
            1 => self.d_one_form(t),
            _ => self.d_higher(t),
        }
    }

    /// `da = Σ_i ω^i · e_i(a)`.
    pub fn d_function(&self, a: &AlgebraElement) -> TensorField {
        let mut out = self.zero(vec![Slot::Form]);
        for i in 0..self.rank() {
            out.add_assign(&self.word_times(&[Slot::Form], &[i as u8], &self.frame_apply(i, a)));
        }
        out
    }

    /// `⟨e_i ⊗ e_j, dω⟩ = −L_{e_i}⟨e_j, ω⟩ + ⟨[e_i, e_j], ω⟩ + L_{R̄^α ▷ e_j}⟨R̄_α ▷ e_i, ω⟩`.
    pub fn d_one_form_evaluation(&self, i: usize, j: usize, omega: &TensorField) -> Result<AlgebraElement> {
        let ei = self.e(i);
        let ej = self.e(j);
        let pairing = |v: &TensorField| -> Result<AlgebraElement> { Ok(self.scalar_part(&self.pair(v, omega)?)) };
        let mut out = self.frame_apply(i, &pairing(&ej)?).neg();
        out.add_assign(&pairing(&self.bracket(&ei, &ej))?);
        for (wl, wr, c) in self.alg().r_inv().terms() {
            let rej = self.h_act(wl, &ej);
            if rej.is_zero() {
                continue;
            }
            let rei = self.h_act(wr, &ei);
            if rei.is_zero() {
                continue;
            }
            out.add_assign(&self.vf_apply(&rej, &pairing(&rei)?).scale(c));
        }
        Ok(out)
    }

    fn d_one_form(&self, omega: &TensorField) -> Result<TensorField> {
        self.reconstruct_covariant(2, |idx| self.d_one_form_evaluation(idx[1] as usize, idx[0] as usize, omega))
    }

    /// `d(ω^{i_1} ∧ … ∧ ω^{i_p})` by the graded Leibniz rule.
    fn d_frame_wedge(&self, idx: &[u8], cache: &mut BTreeMap<Vec<u8>, TensorField>) -> Result<TensorField> {
        if let Some(t) = cache.get(idx) {
            return Ok(t.clone());
        }
        let first = self.w(idx[0] as usize);
        let d_first = self.d_one_form(&first)?;
        let out = if idx.len() == 1 {
            d_first
        } else {
            let rest = self.wedge_frame(&idx[1..])?;
            let d_rest =
                if idx.len() > self.rank() { self.zero(vec![Slot::Form; idx.len()]) } else { self.d_frame_wedge(&idx[1..], cache)? };
            self.wedge(&d_first, &rest)?.sub(&self.wedge(&first, &d_rest)?)
        };
        cache.insert(idx.to_vec(), out.clone());
        Ok(out)
    }

    /// `dθ = (1/p!) Σ_I [d(ω^{I∧})·c_I + (−1)^p ω^{I∧} ∧ dc_I]` with `c_I = ⟨e_{rev I}, θ⟩`.
    fn d_higher(&self, theta: &TensorField) -> Result<TensorField> {
        let p = theta.len();
        let mut out = self.zero(vec![Slot::Form; p + 1]);
        if p >= self.rank() {
            return Ok(out);
        }
        let mut cache = BTreeMap::new();
        for (idx, c) in self.right_coefficients(theta)? {
            let d_frame = self.d_frame_wedge(&idx, &mut cache)?;
            out.add_assign(&self.right_mul(&d_frame, &c));
            let term = self.wedge(&self.wedge_frame(&idx)?, &self.d_function(&c))?;
            if p.is_multiple_of(2) {
                out.add_assign(&term);
            } else {
                out.sub_assign(&term);
            }
        }
        Ok(out.scale_scalar(&inv_factorial(p as u32)))
    }

    /// `[e_k, w] = Σ_i e_k(w^i) e_i + Σ (R̄^α ▷ w^i) ⋆ [R̄_α ▷ e_k, e_i]`.
    fn frame_bracket_left(&self, k: usize, w: &TensorField) -> TensorField {
        let n = self.rank();
        let mut out = self.zero(vec![Slot::Vector]);
        for (idx, wi) in w.terms() {
            let i = idx[0] as usize;
            out.add_term(vec![i as u8], &self.frame_apply(k, wi));
            for (wl, wr, c) in self.alg().r_inv().terms() {
                let lw = self.alg().h_act(wl, wi);
                if lw.is_zero() {
                    continue;
                }
                let m = self.word_matrix(wr);
                for (l, ml) in m[k].iter().enumerate() {
                    if ml.is_zero() {
                        continue;
                    }
                    let coef = lw.scale(c).scale_scalar(ml);
                    for mm in 0..n {
                        let cm = self.structure_function(l, i, mm);
                        if !cm.is_zero() {
                            out.add_term(vec![mm as u8], &self.alg().star(&coef, cm));
                        }
                    }
                }
            }
        }
        out
    }

    /// `[u, e_j] = −Σ [R̄^α ▷ e_j, R̄_α ▷ u]`.
    fn frame_bracket_right(&self, u: &TensorField, j: usize) -> TensorField {
        let mut out = self.zero(vec![Slot::Vector]);
        for (wl, wr, c) in self.alg().r_inv().terms() {
            let m = self.word_matrix(wl);
            if m[j].iter().all(GaussianRational::is_zero) {
                continue;
            }
            let ru = self.h_act(wr, u);
            if ru.is_zero() {
                continue;
            }
            let ru = ru.scale(c);
            for (l, ml) in m[j].iter().enumerate() {
                if !ml.is_zero() {
                    out.sub_assign(&self.frame_bracket_left(l, &ru).scale_scalar(ml));
                }
            }
        }
        out
    }

    /// Braided Lie bracket `[u, v]` of vector fields from the structure functions:
    /// `[u, b e_j] = u(b) e_j + Σ (R̄^α ▷ b) ⋆ [R̄_α ▷ u, e_j]`.
    pub fn bracket(&self, u: &TensorField, v: &TensorField) -> TensorField {
        let mut out = self.zero(vec![Slot::Vector]);
        for (idx, b) in v.terms() {
            let j = idx[0] as usize;
            out.add_term(vec![j as u8], &self.vf_apply(u, b));
            for (wl, wr, c) in self.alg().r_inv().terms() {
                let lb = self.alg().h_act(wl, b);
                if lb.is_zero() {
                    continue;
                }
                let ru = self.h_act(wr, u);
                if ru.is_zero() {
                    continue;
                }
                out.add_assign(&self.left_mul(&lb.scale(c), &self.frame_bracket_right(&ru, j)));
            }
        }
        out
    }

    /// Operator evaluation `[u, v](a) = u(v(a)) − (R̄^α ▷ v)((R̄_α ▷ u)(a))`.
    pub fn bracket_oracle(&self, u: &TensorField, v: &TensorField, a: &AlgebraElement) -> AlgebraElement {
        let mut out = self.vf_apply(u, &self.vf_apply(v, a));
        for (wl, wr, c) in self.alg().r_inv().terms() {
            let rv = self.h_act(wl, v);
            if rv.is_zero() {
                continue;
            }
            let ru = self.h_act(wr, u);
            if ru.is_zero() {
                continue;
            }
            out.sub_assign(&self.vf_apply(&rv, &self.vf_apply(&ru, a)).scale(c));
        }
        out
    }

    /// `L_u` on a single frame leg: `[u, e_k]` or `ω^i · (−⟨[R̄^α ▷ u, R̄_α ▷ e_i], ω^l⟩)`.
    fn lie_frame(&self, u: &TensorField, slot: Slot, l: usize) -> Result<TensorField> {
        match slot {
            Slot::Vector => Ok(self.bracket(u, &self.e(l))),
            Slot::Form => {
                let wl_form = self.w(l);
                let mut out = self.zero(vec![Slot::Form]);
                for i in 0..self.rank() {
                    let ei = self.e(i);
                    let mut coeff = self.alg().zero();
                    for (wl, wr, c) in self.alg().r_inv().terms() {
                        let ru = self.h_act(wl, u);
                        if ru.is_zero() {
                            continue;
                        }
                        let rei = self.h_act(wr, &ei);
                        if rei.is_zero() {
                            continue;
                        }
                        let br = self.bracket(&ru, &rei);
                        coeff.sub_assign(&self.scalar_part(&self.pair(&br, &wl_form)?).scale(c));
                    }
                    out.add_assign(&self.word_times(&[Slot::Form], &[i as u8], &coeff));
                }
                Ok(out)
            }
        }
    }

    /// `L_u` on a basis word by the braided Leibniz rule over slots.
    fn lie_basis(&self, u: &TensorField, sig: &[Slot], idx: &[u8]) -> Result<TensorField> {
        if sig.is_empty() {
            return Ok(self.zero(Vec::new()));
        }
        let head = self.basis(vec![sig[0]], vec![idx[0]]);
        let rest = self.basis(sig[1..].to_vec(), idx[1..].to_vec());
        let mut out = self.concat(&self.lie_frame(u, sig[0], idx[0] as usize)?, &rest);
        if sig.len() > 1 {
            for (wl, wr, c) in self.alg().r_inv().terms() {
                let rh = self.h_act(wl, &head);
                if rh.is_zero() {
                    continue;
                }
                let ru = self.h_act(wr, u);
                if ru.is_zero() {
                    continue;
                }
                let tail = self.lie_basis(&ru, &sig[1..], &idx[1..])?;
                out.add_assign(&self.concat(&rh, &tail).scale(c));
            }
        }
        Ok(out)
    }

    /// Lie derivative `L_u` on any tensor field:
    /// `L_u(a ⋆ w) = u(a) w + Σ (R̄^α ▷ a) ⋆ L_{R̄_α ▷ u}(w)`.
    pub fn lie(&self, u: &TensorField, t: &TensorField) -> Result<TensorField> {
        if u.sig() != [Slot::Vector] {
            return Err(Error::Degree("Lie derivative needs a vector field".into()));
        }
        let mut out = self.zero(t.sig().to_vec());
        let mut basis_cache: BTreeMap<(usize, Vec<u8>), TensorField> = BTreeMap::new();
        let rterms: Vec<_> = self.alg().r_inv().terms().map(|(l, r, c)| (l.clone(), r.clone(), c.clone())).collect();
        let rotated: Vec<TensorField> = rterms.iter().map(|(_, wr, _)| self.h_act(wr, u)).collect();
        for (idx, a) in t.terms() {
            out.add_term(idx.clone(), &self.vf_apply(u, a));
            if t.is_empty() {
                continue;
            }
            for (k, (wl, _, c)) in rterms.iter().enumerate() {
                if rotated[k].is_zero() {
                    continue;
                }
                let la = self.alg().h_act(wl, a);
                if la.is_zero() {
                    continue;
                }
                let key = (k, idx.clone());
                if !basis_cache.contains_key(&key) {
                    let lb = self.lie_basis(&rotated[k], t.sig(), idx)?;
                    basis_cache.insert(key.clone(), lb);
                }
                out.add_assign(&self.left_mul(&la.scale(c), &basis_cache[&key]));
            }
        }
        Ok(out)
    }

    /// `i_u` extended by zero to functions.
    pub fn inner_or_zero(&self, u: &TensorField, t: &TensorField) -> Result<TensorField> {
        if t.is_empty() {
            return Ok(self.zero(Vec::new()));
        }
        self.inner(u, t)
    }

    /// `d` extended by zero above the frame rank.
    fn d_or_zero(&self, t: &TensorField) -> Result<TensorField> {
        if t.len() > self.rank() {
            return Ok(self.zero(vec![Slot::Form; t.len() + 1]));
        }
        self.ext_d(t)
    }

    /// Evaluates the six relations of the braided Cartan calculus on seeded samples.
    pub fn cartan_suite(&self, seed: u64, samples: usize) -> Result<CartanReport> {
        let mut s = Sampler::new(seed);
        let mut report = CartanReport::default();
        for _ in 0..samples {
            let u = s.vector_field(self);
            let v = s.vector_field(self);
            let forms = self.sample_forms(&mut s)?;
            let uv = self.bracket(&u, &v);
            for theta in &forms {
                let p = theta.len();
                // [L_u, L_v] = L_{[u,v]}
                let mut r = self.lie(&u, &self.lie(&v, theta)?)?;
                self.twisted_sum(&u, &v, &mut r, |x, y| self.lie(x, &self.lie(y, theta)?), false)?;
                r.sub_assign(&self.lie(&uv, theta)?);
                report.record("[L_u,L_v]=L_[u,v]", p, &r);
                // [L_u, i_v] = i_{[u,v]}
                if p > 0 {
                    let mut r = self.lie(&u, &self.inner(&v, theta)?)?;
                    self.twisted_sum(&u, &v, &mut r, |x, y| self.inner(x, &self.lie(y, theta)?), false)?;
                    r.sub_assign(&self.inner(&uv, theta)?);
                    report.record("[L_u,i_v]=i_[u,v]", p, &r);
                }
                // [L_u, d] = 0
                let r = self.lie(&u, &self.d_or_zero(theta)?)?.sub(&self.d_or_zero(&self.lie(&u, theta)?)?);
                report.record("[L_u,d]=0", p, &r);
                // [i_u, i_v] = 0
                if p > 1 {
                    let mut r = self.inner(&u, &self.inner(&v, theta)?)?;
                    self.twisted_sum(&u, &v, &mut r, |x, y| self.inner(x, &self.inner(y, theta)?), true)?;
                    report.record("[i_u,i_v]=0", p, &r);
                }
                // [i_u, d] = L_u
                let d_theta = self.d_or_zero(theta)?;
                let mut r = self.inner(&u, &d_theta)?;
                if p > 0 {
                    r.add_assign(&self.d_or_zero(&self.inner(&u, theta)?)?);
                }
                r.sub_assign(&self.lie(&u, theta)?);
                report.record("[i_u,d]=L_u", p, &r);
                // [d, d] = 0
                let r = self.d_or_zero(&d_theta)?;
                report.record("d^2=0", p, &r);
            }
        }
        Ok(report)
    }

    /// Adds `± Σ c · op(R̄^α ▷ v, R̄_α ▷ u)` to `acc` (minus for the ungraded commutator).
    fn twisted_sum(
        &self,
        u: &TensorField,
        v: &TensorField,
        acc: &mut TensorField,
        mut op: impl FnMut(&TensorField, &TensorField) -> Result<TensorField>,
        plus: bool,
    ) -> Result<()> {
        for (wl, wr, c) in self.alg().r_inv().terms() {
            let rv = self.h_act(wl, v);
            if rv.is_zero() {
                continue;
            }
            let ru = self.h_act(wr, u);
            if ru.is_zero() {
                continue;
            }
            let term = op(&rv, &ru)?.scale(c);
            if plus {
                acc.add_assign(&term);
            } else {
                acc.sub_assign(&term);
            }
        }
        Ok(())
    }

    /// A function, a one-form and a two-form (`θ₁ ∧ θ₂ + a ⋆ ω¹ ∧ ω²`).
    pub fn sample_forms(&self, s: &mut Sampler) -> Result<Vec<TensorField>> {
        let alg = self.alg();
        let f = self.function(&s.element(alg));
        let one = s.one_form(self);
        let mut out = vec![f, one];
        if self.rank() >= 2 {
            let a = s.one_form(self);
            let b = s.one_form(self);
            let top: Vec<u8> = (0..2).collect();
            let two = self.wedge(&a, &b)?.add(&self.left_mul(&s.element(alg), &self.wedge_frame(&top)?));
            out.push(two);
        }
        Ok(out)
    }
}

/// `k`-element subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// One relation of the suite at one form degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CartanResidual {
    pub relation: &'static str,
    pub degree: usize,
    pub evaluations: usize,
    /// Number of nonzero terms summed over all residuals; zero means exact.
    pub nonzero_terms: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CartanReport {
    pub residuals: Vec<CartanResidual>,
}

impl CartanReport {
    fn record(&mut self, relation: &'static str, degree: usize, r: &TensorField) {
        let n = r.terms().map(|(_, a)| a.len()).sum::<usize>();
        match self.residuals.iter_mut().find(|x| x.relation == relation && x.degree == degree) {
            Some(entry) => {
                entry.evaluations += 1;
                entry.nonzero_terms += n;
            }
            None => self.residuals.push(CartanResidual { relation, degree, evaluations: 1, nonzero_terms: n }),
        }
    }

    /// Largest residual over all relations.
    pub fn max_residual(&self) -> usize {
        self.residuals.iter().map(|r| r.nonzero_terms).max().unwrap_or(0)
    }

    pub fn is_exact(&self) -> bool {
        self.max_residual() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Algebra, AlgebraKind, AlgebraSpec, Derivation};
    use crate::modules::FrameSpec;
    use crate::sampling::{moyal_geometry, torus_geometry, twisted_frame_geometry};
    use crate::symmetry::TwistSpec;
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> GaussianRational {
        GaussianRational::from_ratio(p, d)
    }

    fn geometries() -> Vec<Geometry> {
        vec![moyal_geometry(2), torus_geometry(2, q(1, 2)), twisted_frame_geometry(2)]
    }

    fn coordinate_geometry(dim: usize, twist: TwistSpec, order: usize) -> Geometry {
        let ders: Vec<Derivation> = (0..dim)
            .map(|j| {
                Derivation::Polynomial(
                    (0..dim).map(|k| if j == k { AlgebraElement::one(dim, order) } else { AlgebraElement::zero(order) }).collect(),
                )
            })
            .collect();
        let spec = AlgebraSpec { kind: AlgebraKind::Polynomial, dim, generators: ders.clone() };
        let alg = Algebra::new(spec, twist, order).unwrap();
        Geometry::new(alg, FrameSpec::coordinate(ders, dim, order)).unwrap()
    }

    #[test]
    fn wedge_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let ff = vec![Slot::Form, Slot::Form];
        let want = geo.basis(ff.clone(), vec![0, 1]).sub(&geo.basis(ff, vec![1, 0]));
        assert_eq!(geo.wedge(&geo.w(0), &geo.w(1)).unwrap(), want);
        assert!(geo.wedge(&geo.w(0), &geo.w(0)).unwrap().is_zero());
        let xw = geo.one_form(&[alg.x(0), alg.zero()]);
        assert_eq!(geo.wedge(&xw, &geo.w(1)).unwrap(), geo.left_mul(&alg.x(0), &want));
    }

    #[test]
    fn inner_examples() {
        let geo = moyal_geometry(2);
        let w12 = geo.wedge(&geo.w(0), &geo.w(1)).unwrap();
        assert_eq!(geo.inner(&geo.e(0), &w12).unwrap(), geo.w(1));
        assert!(geo.inner(&geo.e(0), &geo.w(1)).unwrap().is_zero());
        assert!(matches!(geo.inner(&geo.e(0), &geo.function(&geo.alg().one())), Err(Error::Degree(_))));
    }

    #[test]
    fn bracket_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        assert!(geo.bracket(&geo.e(0), &geo.e(1)).is_zero());
        let u = geo.vector_field(&[alg.x(1), alg.zero()]);
        assert_eq!(geo.bracket(&u, &geo.e(1)), geo.e(0).neg());
        assert_eq!(geo.bracket_oracle(&u, &geo.e(1), &alg.x(0)), alg.one().neg());
        for a in geo.structure_probes() {
            assert!(geo.bracket_oracle(&geo.e(0), &geo.e(1), &a).is_zero());
            assert!(geo.bracket_oracle(&geo.e(0), &geo.e(0), &a).is_zero());
        }
    }

    #[test]
    fn lie_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let xw = geo.one_form(&[alg.zero(), alg.x(0)]);
        assert_eq!(geo.lie(&geo.e(0), &xw).unwrap(), geo.w(1));
        let coev = geo.coevaluation().unwrap();
        for i in 0..2 {
            assert!(geo.lie(&geo.e(i), &coev).unwrap().is_zero());
        }
        let f = geo.function(&alg.monomial(vec![2, 0]));
        assert_eq!(geo.lie(&geo.e(0), &f).unwrap(), geo.function(&alg.x(0).scale_scalar(&q(2, 1))));
        // [i_u, d] − L_u on x1·ω² for u = e1.
        let u = geo.e(0);
        let r = geo.inner(&u, &geo.ext_d(&xw).unwrap()).unwrap().add(&geo.ext_d(&geo.inner(&u, &xw).unwrap()).unwrap());
        assert_eq!(r, geo.lie(&u, &xw).unwrap());
    }

    #[test]
    fn ext_d_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let a = alg.star(&alg.x(0), &alg.x(1));
        assert_eq!(geo.d_function(&a), geo.one_form(&[alg.x(1), alg.x(0)]));
        assert!(geo.d_function(&alg.one()).is_zero());
        for i in 0..2 {
            assert!(geo.ext_d(&geo.w(i)).unwrap().is_zero());
        }
        let three = geo.zero(vec![Slot::Form; 3]);
        assert!(matches!(geo.ext_d(&three), Err(Error::Degree(_))));
    }

    #[test]
    fn one_form_d_without_half() {
        // A factor ½ on the one-form evaluation breaks [i_u, d] = L_u.
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let omega = geo.one_form(&[alg.x(1), alg.zero()]);
        let u = geo.e(1);
        let half = geo.ext_d(&omega).unwrap().scale_scalar(&q(1, 2));
        let lhs = geo.inner(&u, &half).unwrap().add(&geo.ext_d(&geo.inner(&u, &omega).unwrap()).unwrap());
        assert_ne!(lhs, geo.lie(&u, &omega).unwrap());
    }

    #[test]
    fn cartan_suite_moyal_seed_zero() {
        let report = moyal_geometry(2).cartan_suite(0, 3).unwrap();
        assert_eq!(report.residuals.len(), 15);
        assert!(report.is_exact(), "{report:?}");
    }

    #[test]
    fn cartan_suite_classical() {
        let geo = coordinate_geometry(2, TwistSpec::trivial(2), 1);
        assert!(geo.cartan_suite(3, 3).unwrap().is_exact());
    }

    #[test]
    fn cartan_suite_torus_and_twisted_frame() {
        assert!(torus_geometry(2, q(1, 2)).cartan_suite(1, 2).unwrap().is_exact());
        let report = twisted_frame_geometry(2).cartan_suite(2, 2).unwrap();
        assert!(report.is_exact(), "{report:?}");
    }

    #[test]
    fn higher_degree_d_in_three_dimensions() {
        let geo = crate::sampling::moyal3_geometry(1);
        let mut s = Sampler::new(5);
        for _ in 0..2 {
            let theta = s.one_form(&geo);
            let dd = geo.ext_d(&geo.ext_d(&theta).unwrap()).unwrap();
            assert!(dd.is_zero());
            let a = s.one_form(&geo);
            let b = s.one_form(&geo);
            let c = s.one_form(&geo);
            let left = geo.wedge(&geo.wedge(&a, &b).unwrap(), &c).unwrap();
            let right = geo.wedge(&a, &geo.wedge(&b, &c).unwrap()).unwrap();
            assert_eq!(left, right);
            assert!(geo.is_braided_antisymmetric(&left).unwrap());
            // d(a ∧ b) = da ∧ b − a ∧ db.
            let ab = geo.wedge(&a, &b).unwrap();
            let leibniz = geo.wedge(&geo.ext_d(&a).unwrap(), &b).unwrap().sub(&geo.wedge(&a, &geo.ext_d(&b).unwrap()).unwrap());
            assert_eq!(geo.ext_d(&ab).unwrap(), leibniz);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn bracket_matches_oracle(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let u = s.vector_field(&geo);
                let v = s.vector_field(&geo);
                let uv = geo.bracket(&u, &v);
                for a in geo.structure_probes().iter().take(8) {
                    prop_assert_eq!(geo.vf_apply(&uv, a), geo.bracket_oracle(&u, &v, a));
                }
                // Braided antisymmetry [u, v] = −[R̄^α ▷ v, R̄_α ▷ u].
                let mut flipped = geo.zero(vec![Slot::Vector]);
                for (wl, wr, c) in geo.alg().r_inv().terms() {
                    flipped.add_assign(&geo.bracket(&geo.h_act(wl, &v), &geo.h_act(wr, &u)).scale(c));
                }
                prop_assert_eq!(uv.add(&flipped), geo.zero(vec![Slot::Vector]));
            }
        }

        #[test]
        fn braided_jacobi(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let u = s.vector_field(&geo);
                let v = s.vector_field(&geo);
                let z = s.vector_field(&geo);
                let lhs = geo.bracket(&u, &geo.bracket(&v, &z));
                let mut rhs = geo.bracket(&geo.bracket(&u, &v), &z);
                for (wl, wr, c) in geo.alg().r_inv().terms() {
                    rhs.add_assign(&geo.bracket(&geo.h_act(wl, &v), &geo.bracket(&geo.h_act(wr, &u), &z)).scale(c));
                }
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn vector_fields_are_braided_derivations(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let alg = geo.alg();
                let u = s.vector_field(&geo);
                let a = s.element(alg);
                let b = s.element(alg);
                let mut rhs = alg.star(&geo.vf_apply(&u, &a), &b);
                for (wl, wr, c) in alg.r_inv().terms() {
                    rhs.add_assign(&alg.star(&alg.h_act(wl, &a), &geo.vf_apply(&geo.h_act(wr, &u), &b)).scale(c));
                }
                prop_assert_eq!(geo.vf_apply(&u, &alg.star(&a, &b)), rhs);
            }
        }

        #[test]
        fn lie_commutes_with_braiding(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let u = s.vector_field(&geo);
                let t = s.covariant(&geo, 2);
                let lhs = geo.lie(&u, &geo.braid(&t, 0).unwrap()).unwrap();
                prop_assert_eq!(lhs, geo.braid(&geo.lie(&u, &t).unwrap(), 0).unwrap());
            }
        }

        #[test]
        fn one_form_d_matches_leibniz(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let omega = s.one_form(&geo);
                // ω = Σ ω^i · c_i gives dω = Σ dω^i · c_i − ω^i ∧ dc_i.
                let mut want = geo.zero(vec![Slot::Form; 2]);
                for (idx, c) in geo.right_coefficients(&omega).unwrap() {
                    let wi = geo.w(idx[0] as usize);
                    want.add_assign(&geo.right_mul(&geo.ext_d(&wi).unwrap(), &c));
                    want.sub_assign(&geo.wedge(&wi, &geo.d_function(&c)).unwrap());
                }
                prop_assert_eq!(geo.ext_d(&omega).unwrap(), want);
            }
        }

        #[test]
        fn wedge_is_graded_braided_commutative(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let a = s.one_form(&geo);
                let b = s.one_form(&geo);
                let ab = geo.wedge(&a, &b).unwrap();
                prop_assert!(geo.is_braided_antisymmetric(&ab).unwrap());
                let mut flipped = geo.zero(vec![Slot::Form; 2]);
                for (wl, wr, c) in geo.alg().r_inv().terms() {
                    flipped.add_assign(&geo.wedge(&geo.h_act(wl, &b), &geo.h_act(wr, &a)).unwrap().scale(c));
                }
                prop_assert_eq!(ab, flipped.neg());
                let f = s.element(geo.alg());
                prop_assert!(geo.ext_d(&geo.d_function(&f)).unwrap().is_zero());
            }
        }
    }
}
