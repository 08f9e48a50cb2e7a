//! Metrics, flat and sharp maps, the braided Koszul map, the Levi-Civita
//! solver, Ricci tensor and Einstein check.

use crate::algebra::{Algebra, AlgebraElement, BasisMonomial};
use crate::connections::{residual_terms, Connection, CurvatureData};
use crate::error::{Error, Result};
use crate::modules::{invert_matrix, Geometry, Matrix, Slot, TensorField};
use crate::sampling::Sampler;
use crate::scalars::{GaussianRational, Series};

/// Square matrix with entries in the algebra.
pub type ElementMatrix = Vec<Vec<AlgebraElement>>;

/// `g = Σ ω^j ⊗ ω^i · g_{ij}` with braided symmetry `g = τ(g)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metric {
    /// The metric as a covariant two-tensor.
    pub g: TensorField,
    /// `g_{ij} = ⟨e_i ⊗ e_j, g⟩`.
    pub matrix: ElementMatrix,
    /// Left coefficients `G_{ib}` of `g^♭(e_i) = Σ_b G_{ib} ω^b`.
    pub flat_matrix: ElementMatrix,
    /// Star inverse of `flat_matrix`.
    pub sharp_matrix: ElementMatrix,
    /// Inverse of the order-zero part of `flat_matrix`.
    pub classical_inverse: Matrix,
}

/// Output of the Levi-Civita solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LcResult {
    pub connection: Connection,
    /// Constant `c` in `g^♭(∇_u z) = c Σ_i ω^i · 𝔎(τ(e_i ⊗ u) ⊗ z)`.
    pub normalization: GaussianRational,
    /// Number of nonzero terms in the torsion coefficients.
    pub torsion_residual: usize,
    /// Number of nonzero terms in `∇*(g)`.
    pub compatibility_residual: usize,
    /// `𝔎(e_i ⊗ e_j ⊗ e_k)` indexed `[i][j][k]`.
    pub koszul: Vec<Vec<Vec<AlgebraElement>>>,
}

/// Outcome of the Einstein check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Einstein {
    /// `Ric_{ij} = λ ⋆ g_{ij}` for all pairs; `constant` is false when `λ` depends on `h`.
    Proportional { lambda: Series, constant: bool },
    /// The first index pair where no common `λ` fits.
    Violated { i: usize, j: usize },
}

/// Uniqueness probe tally: how many perturbations broke a condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniquenessReport {
    pub trials: usize,
    pub detected: usize,
}

fn order_zero(a: &AlgebraElement) -> Result<GaussianRational> {
    for (m, c) in a.terms() {
        if !m.is_one() && !c.coeff(0).is_zero() {
            return Err(Error::Metric("order-0 metric entries must be constant".into()));
        }
    }
    Ok(a.constant_part().coeff(0).clone())
}

fn matrix_star(alg: &Algebra, a: &ElementMatrix, b: &ElementMatrix) -> ElementMatrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = alg.zero();
                    for (k, row) in b.iter().enumerate() {
                        s.add_assign(&alg.star(&a[i][k], &row[j]));
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// `Σ_k (−A₀⁻¹ N)^k A₀⁻¹` for `A = A₀ + N` with `N` of positive `h`-order.
fn series_inverse(
    alg: &Algebra,
    a: &ElementMatrix,
    a0_inv: &Matrix,
    mul: impl Fn(&ElementMatrix, &ElementMatrix) -> ElementMatrix,
) -> ElementMatrix {
    let n = a.len();
    let inv0: ElementMatrix = a0_inv.iter().map(|row| row.iter().map(|c| alg.constant(c.clone())).collect()).collect();
    let mut neg_step = vec![vec![alg.zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut nij = a[i][j].clone();
            nij.sub_assign(&alg.constant(a[i][j].constant_part().coeff(0).clone()));
            neg_step[i][j] = nij.neg();
        }
    }
    let step = mul(&inv0, &neg_step);
    let mut term = inv0.clone();
    let mut out = inv0;
    for _ in 0..alg.order() {
        term = mul(&step, &term);
        for i in 0..n {
            for j in 0..n {
                out[i][j].add_assign(&term[i][j]);
            }
        }
    }
    out
}

impl Geometry {
    /// Builds `g = Σ ω^j ⊗ ω^i · g_{ij}` and checks its invariants.
    pub fn metric(&self, entries: &ElementMatrix) -> Result<Metric> {
        let n = self.rank();
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Metric("metric matrix must be rank × rank".into()));
        }
        for a in entries.iter().flatten() {
            self.alg().check_element(a)?;
        }
        let g = self.reconstruct_covariant(2, |idx| Ok(entries[idx[1] as usize][idx[0] as usize].clone()))?;
        let asym = g.sub(&self.braid(&g, 0)?);
        if !asym.is_zero() {
            return Err(Error::Metric(format!("metric not braided symmetric: g ≠ τ(g) ({} residual terms)", residual_terms(&asym))));
        }
        let mut matrix = vec![vec![self.alg().zero(); n]; n];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = self.scalar_part(&self.evaluate_frame(&[i as u8, j as u8], &g)?);
            }
        }
        let mut flat_matrix = vec![vec![self.alg().zero(); n]; n];
        for (i, row) in flat_matrix.iter_mut().enumerate() {
            let f = self.inner_frame(i, &g)?;
            for (b, c) in row.iter_mut().enumerate() {
                *c = f.component(&[b as u8]);
            }
        }
        let g0: Matrix = flat_matrix.iter().map(|r| r.iter().map(order_zero).collect::<Result<_>>()).collect::<Result<_>>()?;
        for r in &matrix {
            for a in r {
                order_zero(a)?;
            }
        }
        let classical_inverse = invert_matrix(&g0).map_err(|_| Error::Metric("order-0 metric matrix is not invertible".into()))?;
        let alg = self.alg();
        let sharp_matrix = series_inverse(alg, &flat_matrix, &classical_inverse, |a, b| matrix_star(alg, a, b));
        Ok(Metric { g, matrix, flat_matrix, sharp_matrix, classical_inverse })
    }

    /// The metric with `g_{ij} = δ_{ij}`.
    pub fn flat_metric(&self) -> Result<Metric> {
        let n = self.rank();
        let entries = (0..n).map(|i| (0..n).map(|j| if i == j { self.alg().one() } else { self.alg().zero() }).collect()).collect();
        self.metric(&entries)
    }

    /// `g^♭(v) = ⟨v, g^a⟩ g_a`.
    pub fn metric_flat(&self, g: &Metric, v: &TensorField) -> Result<TensorField> {
        self.inner(v, &g.g)
    }

    /// `g^♯(θ) = Σ θ_b ⋆ (G⁻¹)_{bi} e_i`.
    pub fn metric_sharp(&self, g: &Metric, theta: &TensorField) -> Result<TensorField> {
        if theta.sig() != [Slot::Form] {
            return Err(Error::Degree("sharp expects a one-form".into()));
        }
        let n = self.rank();
        let mut coeffs = vec![self.alg().zero(); n];
        for (idx, a) in theta.terms() {
            for (i, c) in coeffs.iter_mut().enumerate() {
                c.add_assign(&self.alg().star(a, &g.sharp_matrix[idx[0] as usize][i]));
            }
        }
        Ok(self.vector_field(&coeffs))
    }

    /// `⟨x ⊗ y, g⟩` for vector fields `x, y`.
    pub fn metric_pair(&self, g: &Metric, x: &TensorField, y: &TensorField) -> Result<AlgebraElement> {
        Ok(self.scalar_part(&self.pair(&self.concat(x, y), &g.g)?))
    }

    /// The six addends of the Koszul expression
    /// `L_u⟨v⊗z,g⟩ − L_{ᵅv}⟨_αu⊗z,g⟩ + L_{ᵅᵝz}⟨_αu⊗_βv,g⟩ − ⟨[u,v]⊗z,g⟩ + ⟨u⊗[v,z],g⟩ + ⟨[u,ᵝz]⊗_βv,g⟩`,
    /// signs included.
    pub fn koszul_addends(&self, g: &Metric, u: &TensorField, v: &TensorField, z: &TensorField) -> Result<[AlgebraElement; 6]> {
        let r: Vec<_> = self.alg().r_inv().terms().map(|(l, r, c)| (l.clone(), r.clone(), c.clone())).collect();
        let mut out: [AlgebraElement; 6] = std::array::from_fn(|_| self.alg().zero());
        out[0] = self.vf_apply(u, &self.metric_pair(g, v, z)?);
        for (al, ar, ca) in &r {
            let ua = self.h_act(ar, u);
            if ua.is_zero() {
                continue;
            }
            let va = self.h_act(al, v);
            if !va.is_zero() {
                out[1].sub_assign(&self.vf_apply(&va, &self.metric_pair(g, &ua, z)?).scale(ca));
            }
            for (bl, br, cb) in &r {
                let zab = self.h_act(&al.mul(bl), z);
                let vb = self.h_act(br, v);
                if zab.is_zero() || vb.is_zero() {
                    continue;
                }
                out[2].add_assign(&self.vf_apply(&zab, &self.metric_pair(g, &ua, &vb)?).scale(&(ca * cb)));
            }
        }
        out[3] = self.metric_pair(g, &self.bracket(u, v), z)?.neg();
        out[4] = self.metric_pair(g, u, &self.bracket(v, z))?;
        for (bl, br, cb) in &r {
            let zb = self.h_act(bl, z);
            let vb = self.h_act(br, v);
            if zb.is_zero() || vb.is_zero() {
                continue;
            }
            out[5].add_assign(&self.metric_pair(g, &self.bracket(u, &zb), &vb)?.scale(cb));
        }
        Ok(out)
    }

    /// `𝔎(u ⊗ v ⊗ z)`, the sum of the six addends.
    pub fn koszul(&self, g: &Metric, u: &TensorField, v: &TensorField, z: &TensorField) -> Result<AlgebraElement> {
        let mut out = self.alg().zero();
        for t in self.koszul_addends(g, u, v, z)? {
            out.add_assign(&t);
        }
        Ok(out)
    }

    /// `𝔎(e_i ⊗ e_j ⊗ e_k)` indexed `[i][j][k]`.
    pub fn koszul_table(&self, g: &Metric) -> Result<Vec<Vec<Vec<AlgebraElement>>>> {
        let n = self.rank();
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| self.koszul(g, &self.e(i), &self.e(j), &self.e(k))).collect()).collect()).collect()
    }

    /// `𝔎(x ⊗ e_k)` for `x ∈ Vect ⊗_A Vect`, extended left `A`-linearly from the table.
    pub fn koszul_frame(&self, table: &[Vec<Vec<AlgebraElement>>], x: &TensorField, k: usize) -> Result<AlgebraElement> {
        if x.sig() != [Slot::Vector; 2] {
            return Err(Error::Degree("koszul expects a two-fold vector tensor".into()));
        }
        let mut out = self.alg().zero();
        for (idx, a) in x.terms() {
            out.add_assign(&self.alg().star(a, &table[idx[0] as usize][idx[1] as usize][k]));
        }
        Ok(out)
    }

    /// `𝔎(x ⊗ z) = Σ a ⋆ 𝔎(e_i ⊗ e_j ⊗ z)` for a left-normalized `x = Σ a e_i ⊗ e_j`.
    pub fn koszul_on(&self, g: &Metric, x: &TensorField, z: &TensorField) -> Result<AlgebraElement> {
        if x.sig() != [Slot::Vector; 2] {
            return Err(Error::Degree("koszul expects a two-fold vector tensor".into()));
        }
        let mut out = self.alg().zero();
        for (idx, a) in x.terms() {
            let k = self.koszul(g, &self.e(idx[0] as usize), &self.e(idx[1] as usize), z)?;
            out.add_assign(&self.alg().star(a, &k));
        }
        Ok(out)
    }

    /// `∇_{e_m} e_k = g^♯(c Σ_i ω^i · 𝔎(τ(e_i ⊗ e_m) ⊗ e_k))`.
    fn koszul_connection(&self, g: &Metric, table: &[Vec<Vec<AlgebraElement>>], c: &GaussianRational) -> Result<Connection> {
        let n = self.rank();
        let mut conn = Connection::zero(self);
        for m in 0..n {
            for k in 0..n {
                let mut theta = self.zero(vec![Slot::Form]);
                for i in 0..n {
                    let braided = self.braid(&self.concat(&self.e(i), &self.e(m)), 0)?;
                    let kz = self.koszul_frame(table, &braided, k)?;
                    theta.add_assign(&self.word_times(&[Slot::Form], &[i as u8], &kz));
                }
                conn.set(m, k, self.metric_sharp(g, &theta.scale_scalar(c))?);
            }
        }
        Ok(conn)
    }

    /// `∇*(g)` for the dual connection lifted to `Ω ⊗ Ω`.
    pub fn compatibility(&self, g: &Metric, conn: &Connection) -> Result<TensorField> {
        let rc = self.dual_connection(conn)?;
        self.apply_right(&self.sum_right(&rc, &rc)?, &g.g)
    }

    fn lc_residuals(&self, g: &Metric, conn: &Connection) -> Result<(usize, usize)> {
        let t = self.torsion(conn)?;
        let tors = t.coeffs.iter().flatten().flatten().map(|a| a.len()).sum();
        Ok((tors, residual_terms(&self.compatibility(g, conn)?)))
    }

    /// The torsion-free metric-compatible connection. The normalization is the first
    /// candidate for which the torsion residual vanishes.
    pub fn levi_civita(&self, g: &Metric) -> Result<LcResult> {
        let koszul = self.koszul_table(g)?;
        let mut last = None;
        for c in [GaussianRational::from_ratio(1, 2), GaussianRational::one()] {
            let connection = self.koszul_connection(g, &koszul, &c)?;
            let (torsion_residual, compatibility_residual) = self.lc_residuals(g, &connection)?;
            let result = LcResult { connection, normalization: c, torsion_residual, compatibility_residual, koszul: koszul.clone() };
            if torsion_residual == 0 {
                return Ok(result);
            }
            last.get_or_insert(result);
        }
        Ok(last.expect("at least one candidate"))
    }

    /// `Ric(e_a, e_b) = Σ_i ⟨ω^i, R(e_i, e_a, e_b)⟩′` with the braided evaluation.
    pub fn ricci_from(&self, r: &CurvatureData) -> Result<ElementMatrix> {
        let n = self.rank();
        let mut out = vec![vec![self.alg().zero(); n]; n];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                for i in 0..n {
                    let coeffs: Vec<AlgebraElement> = (0..n).map(|l| r.coeffs[i][a][b][l].clone()).collect();
                    let x = self.concat(&self.w(i), &self.vector_field(&coeffs));
                    for (idx, c) in self.braid(&x, 0)?.terms() {
                        if idx[0] == idx[1] {
                            entry.add_assign(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn ricci(&self, conn: &Connection) -> Result<ElementMatrix> {
        self.ricci_from(&self.curvature_sq(conn)?)
    }

    /// Tests `Ric_{ij} = λ ⋆ g_{ij}` with `λ` constant in `A`.
    pub fn einstein_check(&self, g: &Metric, ric: &ElementMatrix) -> Result<Einstein> {
        let n = self.rank();
        let one = BasisMonomial::one(self.alg().dim());
        let (pi, pj) = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| g.matrix[i][j].coeff(&one).is_unit())
            .ok_or_else(|| Error::Metric("no metric entry with a unit constant term".into()))?;
        let lambda = ric[pi][pj].coeff(&one).try_mul(&g.matrix[pi][pj].coeff(&one).invert()?)?;
        for i in 0..n {
            for j in 0..n {
                if ric[i][j] != g.matrix[i][j].scale(&lambda) {
                    return Ok(Einstein::Violated { i, j });
                }
            }
        }
        let constant = lambda.is_constant();
        Ok(Einstein::Proportional { lambda, constant })
    }

    /// Adds `trials` seeded random nonzero left `A`-linear maps to `conn` and counts
    /// how many break torsion-freeness or metric compatibility.
    pub fn uniqueness_probe(&self, g: &Metric, conn: &Connection, seed: u64, trials: usize) -> Result<UniquenessReport> {
        let n = self.rank();
        let mut s = Sampler::new(seed);
        let mut detected = 0;
        for _ in 0..trials {
            let pert = loop {
                let vals: Vec<Vec<TensorField>> = (0..n).map(|_| (0..n).map(|_| s.vector_field(self)).collect()).collect();
                if vals.iter().flatten().any(|v| !v.is_zero()) {
                    break Connection::new(self, vals)?;
                }
            };
            let (t, c) = self.lc_residuals(g, &conn.add(&pert))?;
            if t > 0 || c > 0 {
                detected += 1;
            }
        }
        Ok(UniquenessReport { trials, detected })
    }
}

fn partial(a: &AlgebraElement, j: usize) -> AlgebraElement {
    let mut out = AlgebraElement::zero(a.order());
    for (m, c) in a.terms() {
        let e = m.0[j];
        if e == 0 {
            continue;
        }
        let mut idx = m.0.clone();
        idx[j] -= 1;
        out.add_term(BasisMonomial(idx), &c.scale(&GaussianRational::from_integer(i64::from(e))));
    }
    out
}

/// Commutative oracle `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})` in coordinates,
/// indexed `[i][j][k]`.
pub fn classical_christoffel(alg: &Algebra, g: &ElementMatrix) -> Result<Vec<Vec<Vec<AlgebraElement>>>> {
    let n = g.len();
    let g0: Matrix = g.iter().map(|r| r.iter().map(order_zero).collect::<Result<_>>()).collect::<Result<_>>()?;
    let g0_inv = invert_matrix(&g0)?;
    let cmul = |a: &ElementMatrix, b: &ElementMatrix| -> ElementMatrix {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut s = alg.zero();
                        for (k, row) in b.iter().enumerate() {
                            s.add_assign(&a[i][k].classical_mul(&row[j]));
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    };
    let inv = series_inverse(alg, g, &g0_inv, cmul);
    let half = GaussianRational::from_ratio(1, 2);
    let mut out = vec![vec![vec![alg.zero(); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = alg.zero();
                for l in 0..n {
                    let mut d = partial(&g[j][l], i);
                    d.add_assign(&partial(&g[i][l], j));
                    d.sub_assign(&partial(&g[i][j], l));
                    s.add_assign(&inv[k][l].classical_mul(&d));
                }
                out[i][j][k] = s.scale_scalar(&half);
            }
        }
    }
    Ok(out)
}
