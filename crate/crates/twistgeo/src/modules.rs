//! Free braided-symmetric bimodules over `A` with a frame `e_i` and dual
//! coframe `ω^i`: tensor fields in left-normal form, braiding, bimodule
//! products, pairing and coevaluation.

use std::collections::BTreeMap;

use crate::algebra::{Algebra, AlgebraElement, AlgebraKind, Derivation};
use crate::error::{Error, Result};
use crate::scalars::{GaussianRational, Series};
use crate::symmetry::SymmetryWord;

/// Kind of a tensor slot: a one-form leg `ω` or a vector-field leg `e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Form,
    Vector,
}

pub type Matrix = Vec<Vec<GaussianRational>>;

pub fn identity_matrix(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { GaussianRational::one() } else { GaussianRational::zero() }).collect()).collect()
}

pub fn matrix_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = GaussianRational::zero();
                    for (k, bk) in b.iter().enumerate() {
                        acc += &(&a[i][k] * &bk[j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Frame data: classical derivations `E_i`, constant symmetry matrices
/// `Z_a ▷ e_i = Σ_k M^a_{ik} e_k`, and structure functions `[e_i, e_j] = C_{ij}^k ⋆ e_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSpec {
    pub rank: usize,
    pub derivations: Vec<Derivation>,
    pub symmetry_action: Vec<Matrix>,
    pub structure: Vec<Vec<Vec<AlgebraElement>>>,
}

impl FrameSpec {
    /// Invariant frame with zero structure functions.
    pub fn coordinate(derivations: Vec<Derivation>, generators: usize, order: usize) -> Self {
        let n = derivations.len();
        let zero_matrix = vec![vec![GaussianRational::zero(); n]; n];
        Self {
            rank: n,
            derivations,
            symmetry_action: vec![zero_matrix; generators],
            structure: vec![vec![vec![AlgebraElement::zero(order); n]; n]; n],
        }
    }
}

/// A tensor field `Σ a_I ⋆ (basis word I)` with coefficients on the far left.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TensorField {
    sig: Vec<Slot>,
    order: usize,
    terms: BTreeMap<Vec<u8>, AlgebraElement>,
}

impl TensorField {
    pub fn zero(sig: Vec<Slot>, order: usize) -> Self {
        Self { sig, order, terms: BTreeMap::new() }
    }

    pub fn sig(&self) -> &[Slot] {
        &self.sig
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.sig.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sig.is_empty()
    }

    /// Number of form legs.
    pub fn p(&self) -> usize {
        self.sig.iter().filter(|s| **s == Slot::Form).count()
    }

    /// Number of vector legs.
    pub fn q(&self) -> usize {
        self.sig.iter().filter(|s| **s == Slot::Vector).count()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &AlgebraElement)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn component(&self, idx: &[u8]) -> AlgebraElement {
        self.terms.get(idx).cloned().unwrap_or_else(|| AlgebraElement::zero(self.order))
    }

    pub fn add_term(&mut self, idx: Vec<u8>, a: &AlgebraElement) {
        debug_assert_eq!(idx.len(), self.sig.len());
        if a.is_zero() {
            return;
        }
        match self.terms.get_mut(&idx) {
            Some(entry) => {
                entry.add_assign(a);
                if entry.is_zero() {
                    self.terms.remove(&idx);
                }
            }
            None => {
                self.terms.insert(idx, a.clone());
            }
        }
    }

    fn same_shape(&self, rhs: &Self) {
        assert_eq!(self.sig, rhs.sig, "tensor signature mismatch");
    }

    pub fn add_assign(&mut self, rhs: &Self) {
        self.same_shape(rhs);
        for (i, a) in rhs.terms() {
            self.add_term(i.clone(), a);
        }
    }

    pub fn sub_assign(&mut self, rhs: &Self) {
        self.same_shape(rhs);
        for (i, a) in rhs.terms() {
            self.add_term(i.clone(), &a.neg());
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
        Self { sig: self.sig.clone(), order: self.order, terms: self.terms.iter().map(|(i, a)| (i.clone(), a.neg())).collect() }
    }

    pub fn scale(&self, c: &Series) -> Self {
        let mut out = Self::zero(self.sig.clone(), self.order);
        for (i, a) in self.terms() {
            out.add_term(i.clone(), &a.scale(c));
        }
        out
    }

    pub fn scale_scalar(&self, c: &GaussianRational) -> Self {
        let mut out = Self::zero(self.sig.clone(), self.order);
        for (i, a) in self.terms() {
            out.add_term(i.clone(), &a.scale_scalar(c));
        }
        out
    }

    /// Relabels the signature without touching coefficients.
    pub fn with_sig(mut self, sig: Vec<Slot>) -> Self {
        assert_eq!(sig.len(), self.sig.len());
        self.sig = sig;
        self
    }
}

/// A geometry context: algebra, twist and frame, shared by all its tensors.
#[derive(Clone, Debug)]
pub struct Geometry {
    alg: Algebra,
    frame: FrameSpec,
    invariant: bool,
    /// Terms of `F⁻¹` with the left leg already converted to its frame matrix.
    twisted_frame_terms: Vec<(Matrix, SymmetryWord, Series)>,
}

impl Geometry {
    pub fn new(alg: Algebra, frame: FrameSpec) -> Result<Self> {
        let n = frame.rank;
        if n != alg.dim() {
            return Err(Error::InvalidGeometry(format!("frame rank {n} differs from algebra dimension {}", alg.dim())));
        }
        if frame.derivations.len() != n || frame.symmetry_action.len() != alg.generator_count() || frame.structure.len() != n {
            return Err(Error::InvalidGeometry("frame data has inconsistent sizes".into()));
        }
        for m in &frame.symmetry_action {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidGeometry("symmetry action matrix has the wrong size".into()));
            }
        }
        for d in &frame.derivations {
            let ok = match (alg.kind(), d) {
                (AlgebraKind::Polynomial, Derivation::Polynomial(v)) => v.len() == n && v.iter().all(|x| alg.check_element(x).is_ok()),
                (AlgebraKind::Torus, Derivation::Torus(w)) => w.len() == n,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidGeometry("frame derivation does not match the algebra".into()));
            }
        }
        for row in &frame.structure {
            if row.len() != n || row.iter().any(|c| c.len() != n || c.iter().any(|x| alg.check_element(x).is_err())) {
                return Err(Error::InvalidGeometry("structure functions have the wrong shape".into()));
            }
        }
        let invariant = frame.symmetry_action.iter().all(|m| m.iter().flatten().all(GaussianRational::is_zero));
        let mut geo = Self { alg, frame, invariant, twisted_frame_terms: Vec::new() };
        geo.validate_frame()?;
        geo.twisted_frame_terms = geo
            .alg
            .twist_inv()
            .terms()
            .filter(|(wl, _, _)| !wl.is_one())
            .map(|(wl, wr, c)| (geo.word_matrix(wl), wr.clone(), c.clone()))
            .filter(|(m, _, _)| m.iter().flatten().any(|x| !x.is_zero()))
            .collect();
        geo.validate_structure()?;
        Ok(geo)
    }

    fn validate_frame(&self) -> Result<()> {
        let ms = &self.frame.symmetry_action;
        for a in 0..ms.len() {
            for b in 0..a {
                if matrix_mul(&ms[a], &ms[b]) != matrix_mul(&ms[b], &ms[a]) {
                    return Err(Error::InvalidGeometry(format!(
                        "symmetry actions of Z[{}] and Z[{}] on the frame do not commute",
                        b + 1,
                        a + 1
                    )));
                }
            }
        }
        let order = self.alg.order();
        let spec = self.alg.spec();
        for a in 0..ms.len() {
            for i in 0..self.rank() {
                let lhs = |x: &AlgebraElement| {
                    self.alg
                        .act_generator(a, &self.frame.derivations[i].apply(x))
                        .sub(&self.frame.derivations[i].apply(&self.alg.act_generator(a, x)))
                };
                let rhs = |x: &AlgebraElement| {
                    let mut out = AlgebraElement::zero(order);
                    for k in 0..self.rank() {
                        out.add_assign(&self.frame.derivations[k].apply(x).scale_scalar(&ms[a][i][k]));
                    }
                    out
                };
                if !spec.derivations_agree(&lhs, &rhs, order) {
                    return Err(Error::InvalidGeometry(format!(
                        "declared action Z[{}] |> e[{}] does not match the commutator of the derivations",
                        a + 1,
                        i + 1
                    )));
                }
            }
        }
        // Dual basis: the frame must span all derivations, i.e. det[E_i(x_j)] is a unit.
        let n = self.rank();
        let unit = match self.alg.kind() {
            AlgebraKind::Torus => {
                let w: Matrix = self
                    .frame
                    .derivations
                    .iter()
                    .map(|d| match d {
                        Derivation::Torus(w) => w.clone(),
                        Derivation::Polynomial(_) => unreachable!(),
                    })
                    .collect();
                !determinant(&w).is_zero()
            }
            AlgebraKind::Polynomial => {
                let probes = spec.probe_elements(order);
                let m: Vec<Vec<AlgebraElement>> =
                    (0..n).map(|i| probes.iter().map(|x| self.frame.derivations[i].apply(x)).collect()).collect();
                let det = algebra_determinant(&m, order, spec.dim);
                det.terms().all(|(mono, c)| if mono.is_one() { c.is_unit() } else { c.coeff(0).is_zero() }) && det.constant_part().is_unit()
            }
        };
        if !unit {
            return Err(Error::InvalidGeometry("frame is not a basis of derivations: no dual basis with <e_i, w^j> = delta".into()));
        }
        // Pairing equivariance: <Z e_i, w^j> + <e_i, Z w^j> = 0.
        for a in 0..ms.len() {
            let w = SymmetryWord::generator(a, ms.len());
            for i in 0..n {
                for j in 0..n {
                    let mut total = GaussianRational::zero();
                    for (idx, c) in self.act_basis(&w, &[Slot::Vector], &[i as u8]) {
                        if idx[0] as usize == j {
                            total += &c;
                        }
                    }
                    for (idx, c) in self.act_basis(&w, &[Slot::Form], &[j as u8]) {
                        if idx[0] as usize == i {
                            total += &c;
                        }
                    }
                    if !total.is_zero() {
                        return Err(Error::InvalidGeometry("pairing of frame and coframe is not equivariant".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<()> {
        let samples = self.structure_probes();
        let n = self.rank();
        for i in 0..n {
            for j in 0..n {
                for a in &samples {
                    let lhs = self.frame_bracket_oracle(i, j, a);
                    let mut rhs = self.alg.zero();
                    for k in 0..n {
                        rhs.add_assign(&self.alg.star(&self.frame.structure[i][j][k], &self.frame_apply(k, a)));
                    }
                    if lhs != rhs {
                        return Err(Error::InvalidGeometry(format!(
                            "structure functions C[{},{},k] do not reproduce the braided bracket [e[{}], e[{}]]",
                            i + 1,
                            j + 1,
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Elements on which structure functions are checked: monomials of degree ≤ 3
    /// or torus modes with entries in {-1, 0, 1}.
    pub fn structure_probes(&self) -> Vec<AlgebraElement> {
        let dim = self.alg.dim();
        let range: Vec<i32> = match self.alg.kind() {
            AlgebraKind::Polynomial => (0..=3).collect(),
            AlgebraKind::Torus => (-1..=1).collect(),
        };
        let mut idx = vec![vec![]];
        for _ in 0..dim {
            idx = idx.into_iter().flat_map(|v: Vec<i32>| range.iter().map(move |&e| [v.clone(), vec![e]].concat())).collect();
        }
        idx.into_iter()
            .filter(|v| self.alg.kind() == AlgebraKind::Torus || v.iter().sum::<i32>() <= 3)
            .map(|v| self.alg.monomial(v))
            .collect()
    }

    pub fn alg(&self) -> &Algebra {
        &self.alg
    }

    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }

    pub fn rank(&self) -> usize {
        self.frame.rank
    }

    pub fn order(&self) -> usize {
        self.alg.order()
    }

    /// True when every symmetry generator annihilates the frame.
    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    pub fn structure_function(&self, i: usize, j: usize, k: usize) -> &AlgebraElement {
        &self.frame.structure[i][j][k]
    }

    /// The matrix of `w ▷` on frame vectors: `w ▷ e_i = Σ_k M_{ik} e_k`.
    pub fn word_matrix(&self, w: &SymmetryWord) -> Matrix {
        let mut m = identity_matrix(self.rank());
        for (a, &e) in w.exponents().iter().enumerate() {
            for _ in 0..e {
                m = matrix_mul(&m, &self.frame.symmetry_action[a]);
            }
        }
        m
    }

    /// Action of a symmetry word on a basis word with constant coefficients.
    pub fn act_basis(&self, w: &SymmetryWord, sig: &[Slot], idx: &[u8]) -> Vec<(Vec<u8>, GaussianRational)> {
        if w.is_one() {
            return vec![(idx.to_vec(), GaussianRational::one())];
        }
        if self.invariant {
            return Vec::new();
        }
        let mut cur: BTreeMap<Vec<u8>, GaussianRational> = BTreeMap::new();
        cur.insert(idx.to_vec(), GaussianRational::one());
        for (a, &e) in w.exponents().iter().enumerate() {
            let m = &self.frame.symmetry_action[a];
            for _ in 0..e {
                let mut next: BTreeMap<Vec<u8>, GaussianRational> = BTreeMap::new();
                for (word, c) in &cur {
                    for (s, slot) in sig.iter().enumerate() {
                        let i = word[s] as usize;
                        for k in 0..self.rank() {
                            // Z e_i = Σ_k M_{ik} e_k and Z ω^i = -Σ_k M_{ki} ω^k.
                            let coef = match slot {
                                Slot::Vector => m[i][k].clone(),
                                Slot::Form => -&m[k][i],
                            };
                            if coef.is_zero() {
                                continue;
                            }
                            let mut w2 = word.clone();
                            w2[s] = k as u8;
                            let entry = next.entry(w2).or_insert_with(GaussianRational::zero);
                            *entry += &(c * &coef);
                        }
                    }
                }
                next.retain(|_, c| !c.is_zero());
                cur = next;
            }
        }
        cur.into_iter().collect()
    }

    pub fn zero(&self, sig: Vec<Slot>) -> TensorField {
        TensorField::zero(sig, self.order())
    }

    /// The basis word `idx` with coefficient 1.
    pub fn basis(&self, sig: Vec<Slot>, idx: Vec<u8>) -> TensorField {
        let mut t = self.zero(sig);
        t.add_term(idx, &self.alg.one());
        t
    }

    pub fn e(&self, i: usize) -> TensorField {
        self.basis(vec![Slot::Vector], vec![i as u8])
    }

    pub fn w(&self, i: usize) -> TensorField {
        self.basis(vec![Slot::Form], vec![i as u8])
    }

    /// `Σ_i c_i ⋆ e_i`.
    pub fn vector_field(&self, coeffs: &[AlgebraElement]) -> TensorField {
        let mut t = self.zero(vec![Slot::Vector]);
        for (i, c) in coeffs.iter().enumerate() {
            t.add_term(vec![i as u8], c);
        }
        t
    }

    /// `Σ_i c_i ⋆ ω^i`.
    pub fn one_form(&self, coeffs: &[AlgebraElement]) -> TensorField {
        let mut t = self.zero(vec![Slot::Form]);
        for (i, c) in coeffs.iter().enumerate() {
            t.add_term(vec![i as u8], c);
        }
        t
    }

    /// A function as a tensor with no slots.
    pub fn function(&self, a: &AlgebraElement) -> TensorField {
        let mut t = self.zero(Vec::new());
        t.add_term(Vec::new(), a);
        t
    }

    /// The coefficient of a tensor with no slots.
    pub fn scalar_part(&self, t: &TensorField) -> AlgebraElement {
        assert!(t.is_empty(), "tensor has slots");
        t.component(&[])
    }

    /// `a ⋆ t`.
    pub fn left_mul(&self, a: &AlgebraElement, t: &TensorField) -> TensorField {
        let mut out = self.zero(t.sig.clone());
        if a.is_zero() {
            return out;
        }
        for (i, c) in t.terms() {
            out.add_term(i.clone(), &self.alg.star(a, c));
        }
        out
    }

    /// `w ▷ t` through the coproduct on coefficient and frame legs.
    pub fn h_act(&self, w: &SymmetryWord, t: &TensorField) -> TensorField {
        if w.is_one() {
            return t.clone();
        }
        let mut out = self.zero(t.sig.clone());
        if self.invariant || t.is_empty() {
            for (i, a) in t.terms() {
                out.add_term(i.clone(), &self.alg.h_act(w, a));
            }
            return out;
        }
        for (w1, w2, c) in w.coproduct() {
            let basis_images: BTreeMap<&Vec<u8>, Vec<(Vec<u8>, GaussianRational)>> =
                t.terms().map(|(i, _)| (i, self.act_basis(&w2, &t.sig, i))).collect();
            for (i, a) in t.terms() {
                let wa = self.alg.h_act(&w1, a);
                if wa.is_zero() {
                    continue;
                }
                for (j, k) in &basis_images[i] {
                    out.add_term(j.clone(), &wa.scale_scalar(&(&c * k)));
                }
            }
        }
        out
    }

    /// The element `(basis word idx) · b`, rewritten as `Σ (R̄^α ▷ b) ⋆ (R̄_α ▷ word)`.
    pub fn word_times(&self, sig: &[Slot], idx: &[u8], b: &AlgebraElement) -> TensorField {
        let mut out = self.zero(sig.to_vec());
        if b.is_zero() {
            return out;
        }
        if b.is_constant() || sig.is_empty() {
            out.add_term(idx.to_vec(), b);
            return out;
        }
        for (wl, wr, c) in self.alg.r_inv().terms() {
            let images = self.act_basis(wr, sig, idx);
            if images.is_empty() {
                continue;
            }
            let lb = self.alg.h_act(wl, b);
            if lb.is_zero() {
                continue;
            }
            let lb = lb.scale(c);
            for (j, k) in images {
                out.add_term(j, &lb.scale_scalar(&k));
            }
        }
        out
    }

    /// `t · b`, returned in left-normal form.
    pub fn right_mul(&self, t: &TensorField, b: &AlgebraElement) -> TensorField {
        let mut out = self.zero(t.sig.clone());
        for (i, a) in t.terms() {
            out.add_assign(&self.left_mul(a, &self.word_times(&t.sig, i, b)));
        }
        out
    }

    /// Moves every coefficient of `Σ a ⋆ (word) · b` to the far left.
    pub fn left_normalize(&self, sig: &[Slot], raw: &[(AlgebraElement, Vec<u8>, AlgebraElement)]) -> TensorField {
        let mut out = self.zero(sig.to_vec());
        for (a, idx, b) in raw {
            out.add_assign(&self.left_mul(a, &self.word_times(sig, idx, b)));
        }
        out
    }

    /// The balanced tensor product `s ⊗_A t` with slots concatenated.
    pub fn concat(&self, s: &TensorField, t: &TensorField) -> TensorField {
        let sig: Vec<Slot> = s.sig.iter().chain(&t.sig).copied().collect();
        let mut out = self.zero(sig);
        for (i, a) in s.terms() {
            let mut inner = self.zero(out.sig.clone());
            for (j, b) in t.terms() {
                let moved = self.word_times(&s.sig, i, b);
                for (k, c) in moved.terms() {
                    let idx: Vec<u8> = k.iter().chain(j).copied().collect();
                    inner.add_term(idx, c);
                }
            }
            out.add_assign(&self.left_mul(a, &inner));
        }
        out
    }

    /// Braiding `τ(x ⊗ y) = (R̄^α ▷ y) ⊗ (R̄_α ▷ x)` of the slot blocks
    /// `[start, mid)` and `[mid, end)`.
    pub fn braid_blocks(&self, t: &TensorField, start: usize, mid: usize, end: usize) -> Result<TensorField> {
        if !(start <= mid && mid <= end && end <= t.len()) {
            return Err(Error::SlotOutOfRange { slot: end, len: t.len() });
        }
        let x_sig = &t.sig[start..mid];
        let y_sig = &t.sig[mid..end];
        let sig: Vec<Slot> = t.sig[..start].iter().chain(y_sig).chain(x_sig).chain(&t.sig[end..]).copied().collect();
        let mut out = self.zero(sig);
        for (idx, a) in t.terms() {
            let x = &idx[start..mid];
            let y = &idx[mid..end];
            for (wl, wr, c) in self.alg.r_inv().terms() {
                if !c.is_constant() && (x.is_empty() || y.is_empty()) {
                    continue;
                }
                let ys = self.act_basis(wl, y_sig, y);
                if ys.is_empty() {
                    continue;
                }
                let xs = self.act_basis(wr, x_sig, x);
                for (yy, cy) in &ys {
                    for (xx, cx) in &xs {
                        let new_idx: Vec<u8> = idx[..start].iter().chain(yy).chain(xx).chain(&idx[end..]).copied().collect();
                        out.add_term(new_idx, &a.scale(c).scale_scalar(&(cy * cx)));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Braiding of the adjacent slots `k` and `k+1` (ungraded).
    pub fn braid(&self, t: &TensorField, k: usize) -> Result<TensorField> {
        if k + 1 >= t.len() {
            return Err(Error::SlotOutOfRange { slot: k + 1, len: t.len() });
        }
        self.braid_blocks(t, k, k + 1, k + 2)
    }

    /// Product in `T^{•,•}`: `(θ⊗ν)(θ'⊗ν') = θ ⊗ R̄^α▷θ' ⊗ R̄_α▷ν ⊗ ν'` for
    /// tensors whose form legs precede their vector legs.
    pub fn tensor(&self, s: &TensorField, t: &TensorField) -> Result<TensorField> {
        for x in [s, t] {
            if x.sig.windows(2).any(|w| w[0] == Slot::Vector && w[1] == Slot::Form) {
                return Err(Error::Degree("tensor expects form legs before vector legs".into()));
            }
        }
        let joined = self.concat(s, t);
        let start = s.p();
        let mid = s.len();
        self.braid_blocks(&joined, start, mid, mid + t.p())
    }

    /// Contraction `i_{e_i}` of the first slot, which must be a form leg.
    pub fn inner_frame(&self, i: usize, t: &TensorField) -> Result<TensorField> {
        if t.sig.first() != Some(&Slot::Form) {
            return Err(Error::Degree("contraction needs a leading form slot".into()));
        }
        let sig = t.sig[1..].to_vec();
        let mut out = self.zero(sig);
        for (idx, b) in t.terms() {
            let j = idx[0] as usize;
            let rest = idx[1..].to_vec();
            // ⟨e_i · b, ω^j⟩ = Σ (R̄^α ▷ b) ⋆ ⟨R̄_α ▷ e_i, ω^j⟩.
            if b.is_constant() || self.invariant {
                if i == j {
                    out.add_term(rest, b);
                }
                continue;
            }
            for (wl, wr, c) in self.alg.r_inv().terms() {
                let mut pairing = GaussianRational::zero();
                for (img, k) in self.act_basis(wr, &[Slot::Vector], &[i as u8]) {
                    if img[0] as usize == j {
                        pairing += &k;
                    }
                }
                if pairing.is_zero() {
                    continue;
                }
                let lb = self.alg.h_act(wl, b);
                out.add_term(rest.clone(), &lb.scale(c).scale_scalar(&pairing));
            }
        }
        Ok(out)
    }

    /// Contraction `i_u` of the first (form) slot with a vector field.
    pub fn inner(&self, u: &TensorField, t: &TensorField) -> Result<TensorField> {
        if u.sig != [Slot::Vector] {
            return Err(Error::Degree("inner expects a vector field".into()));
        }
        let mut out = self.zero(t.sig.get(1..).unwrap_or(&[]).to_vec());
        for (idx, a) in u.terms() {
            out.add_assign(&self.left_mul(a, &self.inner_frame(idx[0] as usize, t)?));
        }
        Ok(out)
    }

    /// Nested pairing `⟨v_r ⊗ … ⊗ v_1, ω_1 ⊗ … ⊗ ω_r ⊗ rest⟩`.
    pub fn pair(&self, nu: &TensorField, t: &TensorField) -> Result<TensorField> {
        let r = nu.len();
        if nu.sig.iter().any(|s| *s != Slot::Vector) {
            return Err(Error::Degree("pair expects a contravariant first argument".into()));
        }
        if r > t.len() || t.sig[..r].iter().any(|s| *s != Slot::Form) {
            if t.p() < r {
                return Ok(self.zero(t.sig.get(r.min(t.len())..).unwrap_or(&[]).to_vec()));
            }
            return Err(Error::Degree("pair needs the leading slots to be form legs".into()));
        }
        let mut out = self.zero(t.sig[r..].to_vec());
        for (idx, a) in nu.terms() {
            let mut cur = t.clone();
            for &i in idx.iter().rev() {
                cur = self.inner_frame(i as usize, &cur)?;
            }
            out.add_assign(&self.left_mul(a, &cur));
        }
        Ok(out)
    }

    /// `⟨e_{j_1} ⊗ … ⊗ e_{j_r}, t⟩` for a frame word `j`.
    pub fn evaluate_frame(&self, j: &[u8], t: &TensorField) -> Result<TensorField> {
        let mut cur = t.clone();
        for &i in j.iter().rev() {
            cur = self.inner_frame(i as usize, &cur)?;
        }
        Ok(cur)
    }

    /// The canonical element `I = Σ_i ω^i ⊗ e_i`, checked for invariance.
    pub fn coevaluation(&self) -> Result<TensorField> {
        let mut t = self.zero(vec![Slot::Form, Slot::Vector]);
        for i in 0..self.rank() {
            t.add_term(vec![i as u8, i as u8], &self.alg.one());
        }
        for a in 0..self.alg.generator_count() {
            if !self.h_act(&SymmetryWord::generator(a, self.alg.generator_count()), &t).is_zero() {
                return Err(Error::InvalidGeometry("coevaluation element is not invariant".into()));
            }
        }
        Ok(t)
    }

    /// All frame words of length `p`.
    pub fn frame_words(&self, p: usize) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new()];
        for _ in 0..p {
            out = out.into_iter().flat_map(|w: Vec<u8>| (0..self.rank() as u8).map(move |i| [w.clone(), vec![i]].concat())).collect();
        }
        out
    }

    /// `Σ_I ω^I · c(I)` where `c(I)` should be `⟨e_{rev I}, θ⟩`; by completeness
    /// of the dual basis this rebuilds any covariant tensor from its evaluations.
    pub fn reconstruct_covariant(&self, p: usize, mut coeff: impl FnMut(&[u8]) -> Result<AlgebraElement>) -> Result<TensorField> {
        let sig = vec![Slot::Form; p];
        let mut out = self.zero(sig.clone());
        for idx in self.frame_words(p) {
            let c = coeff(&idx)?;
            out.add_assign(&self.word_times(&sig, &idx, &c));
        }
        Ok(out)
    }

    /// Right-normal coefficients `⟨e_{rev I}, θ⟩` of a covariant tensor.
    pub fn right_coefficients(&self, theta: &TensorField) -> Result<Vec<(Vec<u8>, AlgebraElement)>> {
        let p = theta.len();
        if theta.p() != p {
            return Err(Error::Degree("right coefficients need a covariant tensor".into()));
        }
        let mut out = Vec::new();
        for idx in self.frame_words(p) {
            let rev: Vec<u8> = idx.iter().rev().copied().collect();
            let c = self.scalar_part(&self.evaluate_frame(&rev, theta)?);
            if !c.is_zero() {
                out.push((idx, c));
            }
        }
        Ok(out)
    }

    /// The braided derivation `e_i` acting on a function:
    /// `e_i(a) = Σ_{F⁻¹} c · Σ_k (M^{w})_{ik} E_k(w' ▷ a)`.
    pub fn frame_apply(&self, i: usize, a: &AlgebraElement) -> AlgebraElement {
        let mut out = self.frame.derivations[i].apply(a);
        for (m, wr, c) in &self.twisted_frame_terms {
            let ra = self.alg.h_act(wr, a);
            if ra.is_zero() {
                continue;
            }
            for k in 0..self.rank() {
                if m[i][k].is_zero() {
                    continue;
                }
                out.add_assign(&self.frame.derivations[k].apply(&ra).scale(c).scale_scalar(&m[i][k]));
            }
        }
        out
    }

    /// `u(a) = Σ_i u^i ⋆ e_i(a)`.
    pub fn vf_apply(&self, u: &TensorField, a: &AlgebraElement) -> AlgebraElement {
        let mut out = self.alg.zero();
        for (idx, c) in u.terms() {
            out.add_assign(&self.alg.star(c, &self.frame_apply(idx[0] as usize, a)));
        }
        out
    }

    /// `(w ▷ e_j)(a)` for a symmetry word `w`.
    fn twisted_frame_apply(&self, w: &SymmetryWord, j: usize, a: &AlgebraElement) -> AlgebraElement {
        let mut out = self.alg.zero();
        for (img, k) in self.act_basis(w, &[Slot::Vector], &[j as u8]) {
            out.add_assign(&self.frame_apply(img[0] as usize, a).scale_scalar(&k));
        }
        out
    }

    /// Operator evaluation of `[e_i, e_j](a) = e_i(e_j(a)) − (R̄^α ▷ e_j)((R̄_α ▷ e_i)(a))`.
    pub fn frame_bracket_oracle(&self, i: usize, j: usize, a: &AlgebraElement) -> AlgebraElement {
        let mut out = self.frame_apply(i, &self.frame_apply(j, a));
        for (wl, wr, c) in self.alg.r_inv().terms() {
            let inner = self.twisted_frame_apply(wr, i, a);
            if inner.is_zero() {
                continue;
            }
            out.sub_assign(&self.twisted_frame_apply(wl, j, &inner).scale(c));
        }
        out
    }
}

/// Determinant of a small matrix over the field.
pub fn determinant(m: &Matrix) -> GaussianRational {
    let n = m.len();
    if n == 0 {
        return GaussianRational::one();
    }
    let mut acc = GaussianRational::zero();
    for c in 0..n {
        let minor: Matrix =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, x)| x.clone()).collect()).collect();
        let term = &m[0][c] * &determinant(&minor);
        if c % 2 == 0 {
            acc += &term;
        } else {
            acc -= &term;
        }
    }
    acc
}

/// Classical (commutative) determinant of a small matrix over the algebra.
fn algebra_determinant(m: &[Vec<AlgebraElement>], order: usize, dim: usize) -> AlgebraElement {
    let n = m.len();
    if n == 0 {
        return AlgebraElement::one(dim, order);
    }
    let mut acc = AlgebraElement::zero(order);
    for c in 0..n {
        let minor: Vec<Vec<AlgebraElement>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, x)| x.clone()).collect()).collect();
        let term = m[0][c].classical_mul(&algebra_determinant(&minor, order, dim));
        if c % 2 == 0 {
            acc.add_assign(&term);
        } else {
            acc.sub_assign(&term);
        }
    }
    acc
}

/// Inverse of a small invertible matrix over the field by Gauss–Jordan elimination.
pub fn invert_matrix(m: &Matrix) -> Result<Matrix> {
    let n = m.len();
    let mut a: Vec<Vec<GaussianRational>> = m.iter().zip(identity_matrix(n)).map(|(row, id)| [row.clone(), id].concat()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::DivisionByZero)?;
        a.swap(col, pivot);
        let inv = a[col][col].inv()?;
        for x in a[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (x, p) in a[r].iter_mut().zip(&pivot_row) {
                    *x -= &(&factor * p);
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BasisMonomial;
    use crate::sampling::{moyal_geometry, torus_geometry, twisted_frame_geometry, Sampler};
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> GaussianRational {
        GaussianRational::from_ratio(p, d)
    }

    fn geometries() -> Vec<Geometry> {
        vec![moyal_geometry(2), torus_geometry(2, q(1, 2)), twisted_frame_geometry(2)]
    }

    fn random_mixed(geo: &Geometry, s: &mut Sampler, sig: &[Slot]) -> TensorField {
        let mut t = geo.zero(sig.to_vec());
        for idx in geo.frame_words(sig.len()) {
            if s.rng().random_bool(0.5) {
                let a = s.element(geo.alg());
                t.add_term(idx, &a);
            }
        }
        t
    }

    use rand::Rng;

    #[test]
    fn braid_functions_moyal() {
        let alg = crate::sampling::moyal_algebra(2);
        let got = alg.braid_elements(&alg.x(0), &alg.x(1));
        let mut want = BTreeMap::new();
        want.insert((BasisMonomial(vec![0, 1]), BasisMonomial(vec![1, 0])), Series::one(2));
        want.insert((BasisMonomial(vec![0, 0]), BasisMonomial(vec![0, 0])), Series::monomial(q(2, 1), 1, 2));
        assert_eq!(got, want);
    }

    #[test]
    fn braid_invariant_legs_is_flip() {
        let geo = moyal_geometry(2);
        let t = geo.basis(vec![Slot::Form, Slot::Form], vec![0, 1]);
        assert_eq!(geo.braid(&t, 0).unwrap(), geo.basis(vec![Slot::Form, Slot::Form], vec![1, 0]));
        assert!(matches!(geo.braid(&t, 1), Err(Error::SlotOutOfRange { .. })));
    }

    #[test]
    fn left_normalize_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let got = geo.left_normalize(&[Slot::Form], &[(alg.one(), vec![0], alg.x(0))]);
        assert_eq!(got, geo.one_form(&[alg.x(0), alg.zero()]));
        let got = geo.left_normalize(&[Slot::Vector], &[(alg.one(), vec![0], alg.x(1))]);
        assert_eq!(got, geo.vector_field(&[alg.x(1), alg.zero()]));

        // Z1 ▷ e1 = e2 and R̄ = exp(2h(Z2⊗Z1 − Z1⊗Z2)) give e1·a = a e1 + 2h ∂2(a) e2.
        let tw = twisted_frame_geometry(2);
        let alg = tw.alg();
        let two_h = alg.h().scale_scalar(&q(2, 1));
        let got = tw.left_normalize(&[Slot::Vector], &[(alg.one(), vec![0], alg.x(1))]);
        assert_eq!(got, tw.vector_field(&[alg.x(1), two_h.clone()]));
        let a = alg.monomial(vec![1, 2]);
        let got = tw.left_normalize(&[Slot::Vector], &[(alg.one(), vec![0], a.clone())]);
        let d2a = alg.monomial(vec![1, 1]).scale_scalar(&q(2, 1));
        assert_eq!(got, tw.vector_field(&[a, alg.star(&two_h, &d2a)]));
        // Dually ω²·a = a ω² − 2h ∂2(a) ω¹.
        let got = tw.left_normalize(&[Slot::Form], &[(alg.one(), vec![1], alg.x(1))]);
        assert_eq!(got, tw.one_form(&[two_h.neg(), alg.x(1)]));
    }

    #[test]
    fn pair_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let one = geo.function(&alg.one());
        assert_eq!(geo.pair(&geo.e(0), &geo.w(0)).unwrap(), one);
        let ff = [Slot::Form, Slot::Form];
        let vv = vec![Slot::Vector, Slot::Vector];
        let w12 = geo.basis(ff.to_vec(), vec![0, 1]);
        assert_eq!(geo.pair(&geo.basis(vv.clone(), vec![1, 0]), &w12).unwrap(), one);
        assert!(geo.pair(&geo.basis(vv.clone(), vec![0, 1]), &w12).unwrap().is_zero());
        let v = geo.vector_field(&[alg.x(0), alg.zero()]);
        let w = geo.one_form(&[alg.x(1), alg.zero()]);
        assert_eq!(geo.scalar_part(&geo.pair(&v, &w).unwrap()), alg.monomial(vec![1, 1]).add(&alg.h()));
        assert!(geo.pair(&geo.basis(vv, vec![0, 0]), &geo.w(0)).unwrap().is_zero());
    }

    #[test]
    fn coevaluation_and_rigidity() {
        let geo = moyal_geometry(2);
        let mut want = geo.zero(vec![Slot::Form, Slot::Vector]);
        want.add_term(vec![0, 0], &geo.alg().one());
        want.add_term(vec![1, 1], &geo.alg().one());
        assert_eq!(geo.coevaluation().unwrap(), want);
        for geo in geometries() {
            let coev = geo.coevaluation().unwrap();
            let mut s = Sampler::new(11);
            for _ in 0..5 {
                let v = s.vector_field(&geo);
                assert_eq!(geo.pair(&v, &coev).unwrap(), v);
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let geo = moyal_geometry(2);
        let alg = geo.alg();
        let ff = vec![Slot::Form, Slot::Form];
        assert_eq!(geo.tensor(&geo.w(0), &geo.w(1)).unwrap(), geo.basis(ff, vec![0, 1]));
        let xw = geo.one_form(&[alg.x(0), alg.zero()]);
        let mut want = geo.zero(vec![Slot::Form, Slot::Vector]);
        want.add_term(vec![0, 1], &alg.x(0));
        assert_eq!(geo.tensor(&xw, &geo.e(1)).unwrap(), want);
        let xe = geo.vector_field(&[alg.x(0), alg.zero()]);
        let mut want = geo.zero(vec![Slot::Form, Slot::Vector]);
        want.add_term(vec![0, 0], &alg.x(0));
        assert_eq!(geo.tensor(&geo.w(0), &xe).unwrap(), want);
        // Covariant legs of the second factor pass over the vector legs of the first.
        let got = geo.tensor(&geo.e(0), &geo.w(1)).unwrap();
        assert_eq!(got.sig(), &[Slot::Form, Slot::Vector]);
        assert_eq!(got.component(&[1, 0]), alg.one());
    }

    #[test]
    fn invalid_frames_rejected() {
        let geo = twisted_frame_geometry(2);
        let mut frame = geo.frame().clone();
        frame.structure[0][1][0] = geo.alg().one();
        assert!(matches!(Geometry::new(geo.alg().clone(), frame), Err(Error::InvalidGeometry(_))));
        let mut frame = geo.frame().clone();
        frame.symmetry_action[0][0][1] = GaussianRational::zero();
        assert!(matches!(Geometry::new(geo.alg().clone(), frame), Err(Error::InvalidGeometry(_))));
        let mut frame = geo.frame().clone();
        frame.derivations[1] = frame.derivations[0].clone();
        frame.symmetry_action[0][0][1] = GaussianRational::zero();
        assert!(matches!(Geometry::new(geo.alg().clone(), frame), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn twisted_frame_action() {
        // e1 = E1 + h ∂2² on the twisted frame, by expanding F⁻¹ legwise.
        let geo = twisted_frame_geometry(2);
        let alg = geo.alg();
        let a = alg.monomial(vec![2, 3]);
        let e1 = alg.monomial(vec![1, 3]).scale_scalar(&q(2, 1)).add(&alg.monomial(vec![3, 2]).scale_scalar(&q(3, 1)));
        let d22 = alg.monomial(vec![2, 1]).scale_scalar(&q(6, 1));
        assert_eq!(geo.frame_apply(0, &a), e1.add(&alg.star(&alg.h(), &d22)));
        assert_eq!(geo.frame_apply(1, &a), alg.monomial(vec![2, 2]).scale_scalar(&q(3, 1)));
    }

    #[test]
    fn matrix_helpers() {
        let m = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]];
        assert_eq!(determinant(&m), q(1, 1));
        let inv = invert_matrix(&m).unwrap();
        assert_eq!(matrix_mul(&m, &inv), identity_matrix(2));
        assert!(invert_matrix(&vec![vec![q(1, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn braid_is_involution(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let sig = [Slot::Form, Slot::Vector, Slot::Form];
                let t = random_mixed(&geo, &mut s, &sig);
                for k in 0..2 {
                    let back = geo.braid(&geo.braid(&t, k).unwrap(), k).unwrap();
                    prop_assert_eq!(&back, &t);
                }
            }
        }

        #[test]
        fn left_normalize_is_idempotent(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let t = random_mixed(&geo, &mut s, &[Slot::Form, Slot::Vector]);
                let raw: Vec<_> = t.terms().map(|(i, a)| (a.clone(), i.clone(), geo.alg().one())).collect();
                let once = geo.left_normalize(t.sig(), &raw);
                prop_assert_eq!(&once, &t);
            }
        }

        #[test]
        fn bimodule_laws(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let alg = geo.alg();
                let t = random_mixed(&geo, &mut s, &[Slot::Vector, Slot::Form]);
                let a = s.element(alg);
                let b = s.element(alg);
                prop_assert_eq!(geo.right_mul(&geo.right_mul(&t, &a), &b), geo.right_mul(&t, &alg.star(&a, &b)));
                prop_assert_eq!(geo.right_mul(&geo.left_mul(&a, &t), &b), geo.left_mul(&a, &geo.right_mul(&t, &b)));
                // Braided symmetry: a·t = Σ (R̄^α ▷ t)·(R̄_α ▷ a).
                let mut rhs = geo.zero(t.sig().to_vec());
                for (wl, wr, c) in alg.r_inv().terms() {
                    rhs.add_assign(&geo.right_mul(&geo.h_act(wl, &t), &alg.h_act(wr, &a)).scale(c));
                }
                prop_assert_eq!(geo.left_mul(&a, &t), rhs);
            }
        }

        #[test]
        fn concat_is_balanced(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let x = random_mixed(&geo, &mut s, &[Slot::Form]);
                let y = random_mixed(&geo, &mut s, &[Slot::Vector]);
                let a = s.element(geo.alg());
                prop_assert_eq!(geo.concat(&geo.right_mul(&x, &a), &y), geo.concat(&x, &geo.left_mul(&a, &y)));
            }
        }

        #[test]
        fn dual_basis_completeness(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                for p in 1..=2 {
                    let theta = s.covariant(&geo, p);
                    let rebuilt = geo
                        .reconstruct_covariant(p, |idx| {
                            let rev: Vec<u8> = idx.iter().rev().copied().collect();
                            Ok(geo.scalar_part(&geo.evaluate_frame(&rev, &theta)?))
                        })
                        .unwrap();
                    prop_assert_eq!(&rebuilt, &theta);
                }
                let v = s.vector_field(&geo);
                let mut rebuilt = geo.zero(vec![Slot::Vector]);
                for i in 0..geo.rank() {
                    let c = geo.scalar_part(&geo.pair(&v, &geo.w(i)).unwrap());
                    rebuilt.add_assign(&geo.left_mul(&c, &geo.e(i)));
                }
                prop_assert_eq!(rebuilt, v);
            }
        }

        #[test]
        fn pair_is_equivariant(seed in any::<u64>()) {
            for geo in geometries() {
                let mut s = Sampler::new(seed);
                let nu = s.vector_field(&geo);
                let t = random_mixed(&geo, &mut s, &[Slot::Form, Slot::Vector]);
                for a in 0..geo.alg().generator_count() {
                    let z = SymmetryWord::generator(a, geo.alg().generator_count());
                    let lhs = geo.h_act(&z, &geo.pair(&nu, &t).unwrap());
                    let rhs = geo.pair(&geo.h_act(&z, &nu), &t).unwrap().add(&geo.pair(&nu, &geo.h_act(&z, &t)).unwrap());
                    prop_assert_eq!(lhs, rhs);
                }
            }
        }
    }
}
