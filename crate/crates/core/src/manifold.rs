//! The two constraint manifolds of the beamforming problem.
//!
//! * [`Circle`]: vectors with unit-modulus entries (the IRS phases).
//! * [`Oblique`]: matrices with unit-norm rows (the BS beamformers).
//!
//! Both carry the embedded metric `<u, v> = Re(sum conj(u_i) v_i)`. Tangent
//! vectors share storage with ambient vectors; tangency at a base point is
//! checked with [`Manifold::is_tangent`] rather than tracked in the type.

use ndarray::{Array, Array1, Array2, Dimension, Ix1, Ix2, Zip};

use crate::error::{Error, Result};
use crate::model::{BeamMatrix, PhaseVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Circle { dim: usize },
    Oblique { rows: usize, cols: usize },
}

/// Real part of the ambient inner product.
pub fn ambient_inner<D: Dimension>(u: &Array<C64, D>, v: &Array<C64, D>) -> f64 {
    Zip::from(u).and(v).fold(0.0, |acc, a, b| acc + a.re * b.re + a.im * b.im)
}

pub trait Manifold {
    type Dim: Dimension;

    fn kind(&self) -> ManifoldKind;

    fn shape(&self) -> Self::Dim;

    fn check_shape(&self, x: &Array<C64, Self::Dim>, context: &'static str) -> Result<()> {
        if x.raw_dim() != self.shape() {
            return Err(Error::dim(
                context,
                format!("{:?}", self.shape().slice()),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }

    /// Fails unless `x` lies on the manifold.
    fn check_point(&self, x: &Array<C64, Self::Dim>) -> Result<()>;

    /// Orthogonal projection of an ambient vector onto the tangent space at `x`.
    fn project(&self, x: &Array<C64, Self::Dim>, g: &Array<C64, Self::Dim>) -> Result<Array<C64, Self::Dim>>;

    /// Normalization retraction of `x + step * d`.
    fn retract(&self, x: &Array<C64, Self::Dim>, d: &Array<C64, Self::Dim>, step: f64) -> Result<Array<C64, Self::Dim>>;

    fn inner(&self, u: &Array<C64, Self::Dim>, v: &Array<C64, Self::Dim>) -> f64 {
        ambient_inner(u, v)
    }

    fn norm(&self, u: &Array<C64, Self::Dim>) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Largest per-entry (circle) or per-row (oblique) magnitude of `d`.
    fn step_scale(&self, d: &Array<C64, Self::Dim>) -> f64;

    /// Largest violation of the tangency condition at `x`.
    fn tangency_residual(&self, x: &Array<C64, Self::Dim>, v: &Array<C64, Self::Dim>) -> f64;

    fn is_tangent(&self, x: &Array<C64, Self::Dim>, v: &Array<C64, Self::Dim>, tol: f64) -> bool {
        self.tangency_residual(x, v) <= tol
    }
}

/// `grad f = P_x(euclidean gradient)`.
pub fn riemannian_grad<M: Manifold>(
    manifold: &M,
    x: &Array<C64, M::Dim>,
    euclid_grad: &Array<C64, M::Dim>,
) -> Result<Array<C64, M::Dim>> {
    manifold.project(x, euclid_grad)
}

/// Embedded inner product of two tangent vectors of `kind`.
pub fn inner<D: Dimension>(kind: ManifoldKind, u: &Array<C64, D>, v: &Array<C64, D>) -> Result<f64> {
    let expected: Vec<usize> = match kind {
        ManifoldKind::Circle { dim } => vec![dim],
        ManifoldKind::Oblique { rows, cols } => vec![rows, cols],
    };
    for x in [u, v] {
        if x.shape() != expected.as_slice() {
            return Err(Error::dim("tangent vector", format!("{expected:?}"), format!("{:?}", x.shape())));
        }
    }
    Ok(ambient_inner(u, v))
}

/// Unit-modulus vectors in `C^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Circle {
    pub dim: usize,
}

impl Circle {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("circle manifold needs dim ≥ 1".into()));
        }
        Ok(Self { dim })
    }
}

impl Manifold for Circle {
    type Dim = Ix1;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Circle { dim: self.dim }
    }

    fn shape(&self) -> Ix1 {
        Ix1(self.dim)
    }

    fn check_point(&self, x: &Array1<C64>) -> Result<()> {
        self.check_shape(x, "circle point")?;
        PhaseVector::new(x.clone()).map(|_| ())
    }

    fn project(&self, x: &Array1<C64>, g: &Array1<C64>) -> Result<Array1<C64>> {
        self.check_shape(x, "circle point")?;
        self.check_shape(g, "ambient vector")?;
        Ok(Zip::from(g).and(x).map_collect(|g, t| {
            let radial = (g * t.conj()).re;
            g - t * radial
        }))
    }

    fn retract(&self, x: &Array1<C64>, d: &Array1<C64>, step: f64) -> Result<Array1<C64>> {
        self.check_shape(x, "circle point")?;
        self.check_shape(d, "tangent vector")?;
        let mut out = Array1::<C64>::zeros(self.dim);
        for (i, ((o, t), v)) in out.iter_mut().zip(x).zip(d).enumerate() {
            let z = t + v * step;
            let r = z.norm();
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::DegenerateRetraction { index: i });
            }
            *o = z / r;
        }
        Ok(out)
    }

    fn step_scale(&self, d: &Array1<C64>) -> f64 {
        d.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
    }

    fn tangency_residual(&self, x: &Array1<C64>, v: &Array1<C64>) -> f64 {
        Zip::from(x)
            .and(v)
            .fold(0.0, |acc: f64, t, v| acc.max((v * t.conj()).re.abs()))
    }
}

/// Complex `rows x cols` matrices whose rows have unit Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oblique {
    pub rows: usize,
    pub cols: usize,
}

impl Oblique {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("oblique manifold needs rows, cols ≥ 1".into()));
        }
        Ok(Self { rows, cols })
    }
}

/// `Re(<a, b>)` of two rows.
fn row_inner(a: ndarray::ArrayView1<'_, C64>, b: ndarray::ArrayView1<'_, C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

impl Manifold for Oblique {
    type Dim = Ix2;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Oblique {
            rows: self.rows,
            cols: self.cols,
        }
    }

    fn shape(&self) -> Ix2 {
        Ix2(self.rows, self.cols)
    }

    fn check_point(&self, x: &Array2<C64>) -> Result<()> {
        self.check_shape(x, "oblique point")?;
        BeamMatrix::new(x.clone()).map(|_| ())
    }

    /// `g - (I ∘ Re{W g^H}) W`.
    fn project(&self, x: &Array2<C64>, g: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_shape(x, "oblique point")?;
        self.check_shape(g, "ambient matrix")?;
        let mut out = g.clone();
        for ((mut o, w), gr) in out.rows_mut().into_iter().zip(x.rows()).zip(g.rows()) {
            let radial = row_inner(w, gr);
            o.zip_mut_with(&w, |o, w| *o -= w * radial);
        }
        Ok(out)
    }

    fn retract(&self, x: &Array2<C64>, d: &Array2<C64>, step: f64) -> Result<Array2<C64>> {
        self.check_shape(x, "oblique point")?;
        self.check_shape(d, "tangent matrix")?;
        let mut out = x + &(d * C64::new(step, 0.0));
        for (k, mut row) in out.rows_mut().into_iter().enumerate() {
            let r = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::DegenerateRetraction { index: k });
            }
            row.mapv_inplace(|z| z / r);
        }
        Ok(out)
    }

    fn step_scale(&self, d: &Array2<C64>) -> f64 {
        d.rows()
            .into_iter()
            .fold(0.0, |acc: f64, r| acc.max(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
    }

    fn tangency_residual(&self, x: &Array2<C64>, v: &Array2<C64>) -> f64 {
        x.rows()
            .into_iter()
            .zip(v.rows())
            .fold(0.0, |acc: f64, (w, v)| acc.max(row_inner(w, v).abs()))
    }
}

pub fn project_circle(theta: &PhaseVector, g: &Array1<C64>) -> Result<Array1<C64>> {
    Circle::new(theta.len())?.project(theta.as_array(), g)
}

pub fn project_oblique(w: &BeamMatrix, g: &Array2<C64>) -> Result<Array2<C64>> {
    Oblique::new(w.n_users(), w.n_antennas())?.project(w.as_array(), g)
}

pub fn retract_circle(theta: &PhaseVector, d: &Array1<C64>, alpha: f64) -> Result<PhaseVector> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("retraction step must be ≥ 0, got {alpha}")));
    }
    PhaseVector::new(Circle::new(theta.len())?.retract(theta.as_array(), d, alpha)?)
}

pub fn retract_oblique(w: &BeamMatrix, d: &Array2<C64>, beta: f64) -> Result<BeamMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("retraction step must be ≥ 0, got {beta}")));
    }
    BeamMatrix::new(Oblique::new(w.n_users(), w.n_antennas())?.retract(w.as_array(), d, beta)?)
}
