//! LOS mmWave channel generation.
//!
//! Steering vectors use half-wavelength spacing with the 0-based
//! convention `a[m] = exp(j * pi * m * sin(phi))`. Planar arrays are the
//! Kronecker product `a_az(theta) ⊗ a_el(phi)` with the azimuth factor of
//! length `M_x` first.
//!
//! All randomness comes from the injected RNG, so a fixed seed reproduces a
//! scenario bit for bit.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{SystemConfig, C64};

/// Rank-one tolerance: residual outside the dominant direction relative to the norm.
pub const RANK_ONE_RTOL: f64 = 1e-9;
/// Relative spread allowed between entry magnitudes of a user channel.
pub const CONSTANT_MODULUS_RTOL: f64 = 1e-12;

pub fn ula_steering(phi: f64, n: usize) -> Array1<C64> {
    let s = phi.rem_euclid(TAU).sin();
    Array1::from_shape_fn(n, |m| {
        let phase = (PI * m as f64 * s).rem_euclid(TAU);
        C64::from_polar(1.0, phase)
    })
}

pub fn upa_steering(phi_el: f64, theta_az: f64, mx: usize, my: usize) -> Array1<C64> {
    let az = ula_steering(theta_az, mx);
    let el = ula_steering(phi_el, my);
    Array1::from_shape_fn(mx * my, |idx| az[idx / my] * el[idx % my])
}

/// `G = gamma * a_r(phi_r, theta_r) * a_t(phi_t)^H`, shape `M x N`.
pub fn bs_irs_channel(
    gamma: C64,
    phi_r: f64,
    theta_r: f64,
    phi_t: f64,
    mx: usize,
    my: usize,
    n: usize,
) -> Array2<C64> {
    let ar = upa_steering(phi_r, theta_r, mx, my);
    let at = ula_steering(phi_t, n);
    Array2::from_shape_fn((mx * my, n), |(m, j)| gamma * ar[m] * at[j].conj())
}

/// `h = rho * a(phi_el, theta_az)`, length `M`.
pub fn irs_user_channel(rho: C64, phi_el: f64, theta_az: f64, mx: usize, my: usize) -> Array1<C64> {
    upa_steering(phi_el, theta_az, mx, my).mapv(|a| rho * a)
}

/// Log-distance path loss `alpha + beta * log10(d) + xi` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub alpha_db: f64,
    pub beta: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            alpha_db: 61.4,
            beta: 20.0,
        }
    }
}

impl PathLoss {
    pub fn db(&self, d: f64, xi: f64) -> Result<f64> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "path-loss distance must be positive, got {d}"
            )));
        }
        Ok(self.alpha_db + self.beta * d.log10() + xi)
    }

    /// Amplitude gain `10^(-PL/20)`.
    pub fn amplitude(&self, d: f64, xi: f64) -> Result<f64> {
        Ok(10f64.powf(-self.db(d, xi)? / 20.0))
    }
}

/// Path loss with the default model.
pub fn path_loss_db(d: f64, xi: f64) -> Result<f64> {
    PathLoss::default().db(d, xi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `other` as seen from `self`.
    pub fn azimuth_to(&self, other: &Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    /// Elevation of `other` from the vertical offset over the horizontal run.
    pub fn elevation_to(&self, other: &Point2) -> f64 {
        (other.y - self.y).abs().atan2((other.x - self.x).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub bs: Point2,
    pub irs: Vec<Point2>,
    pub users: Vec<Point2>,
}

impl Placement {
    /// BS at the origin, IRSs equally spaced on the line `y = irs_vertical_m`
    /// from `irs_first_m` to `irs_last_m`, users on the BS line.
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let g = cfg.geometry();
        let l = cfg.n_irs();
        let irs = (0..l)
            .map(|i| {
                let x = if l == 1 {
                    g.irs_first_m
                } else {
                    g.irs_first_m + (g.irs_last_m - g.irs_first_m) * i as f64 / (l - 1) as f64
                };
                Point2::new(x, g.irs_vertical_m)
            })
            .collect();
        let users = (0..cfg.n_users())
            .map(|k| Point2::new(g.user_first_m + g.user_spacing_m * k as f64, 0.0))
            .collect();
        let placement = Self {
            bs: Point2::new(0.0, 0.0),
            irs,
            users,
        };
        placement.check()?;
        Ok(placement)
    }

    /// Rejects any two nodes sharing a position.
    pub fn check(&self) -> Result<()> {
        let nodes: Vec<(String, Point2)> = std::iter::once(("bs".to_string(), self.bs))
            .chain(self.irs.iter().enumerate().map(|(l, p)| (format!("irs{l}"), *p)))
            .chain(self.users.iter().enumerate().map(|(k, p)| (format!("user{k}"), *p)))
            .collect();
        for (i, (a, pa)) in nodes.iter().enumerate() {
            for (b, pb) in &nodes[i + 1..] {
                if !(pa.distance(pb) > 0.0) {
                    return Err(Error::Geometry(format!(
                        "{a} and {b} share position ({}, {})",
                        pa.x, pa.y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Realized channels plus the per-user stacked cascade `C_k` (LM x N) whose
/// row `l*M + m` is `conj(h_{l,k}[m]) * G_l[m, :]`, so that `v_k^H = theta^T C_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    irs_elements: usize,
    bs_irs: Vec<Array2<C64>>,
    irs_user: Vec<Vec<Array1<C64>>>,
    bs_irs_gains: Vec<C64>,
    irs_user_gains: Vec<Vec<C64>>,
    placement: Option<Placement>,
    cascade: Vec<Array2<C64>>,
}

impl ChannelSet {
    /// `bs_irs[l]` is `G_l`; `irs_user[l][k]` is `h_{r,l,k}`.
    ///
    /// Checks dimensions, rank-one structure of every `G_l`, and constant
    /// entry magnitude of every `h_{r,l,k}`.
    pub fn new(
        bs_irs: Vec<Array2<C64>>,
        irs_user: Vec<Vec<Array1<C64>>>,
        bs_irs_gains: Vec<C64>,
        irs_user_gains: Vec<Vec<C64>>,
        placement: Option<Placement>,
    ) -> Result<Self> {
        let l = bs_irs.len();
        if l == 0 {
            return Err(Error::InvalidArgument("at least one IRS channel is required".into()));
        }
        let (m, n) = bs_irs[0].dim();
        if m == 0 || n == 0 {
            return Err(Error::dim("bs_irs", "non-empty M x N", format!("{m} x {n}")));
        }
        if irs_user.len() != l || bs_irs_gains.len() != l || irs_user_gains.len() != l {
            return Err(Error::dim("irs_user", l, irs_user.len()));
        }
        let k = irs_user[0].len();
        if k == 0 {
            return Err(Error::InvalidArgument("at least one user is required".into()));
        }
        for (li, g) in bs_irs.iter().enumerate() {
            if g.dim() != (m, n) {
                return Err(Error::dim("bs_irs", format!("{m} x {n}"), format!("{:?}", g.dim())));
            }
            let residual = rank_one_residual(g);
            let norm = frobenius(g);
            if residual > RANK_ONE_RTOL * norm {
                return Err(Error::InvalidArgument(format!(
                    "G_{li} is not rank one (residual {residual:e}, norm {norm:e})"
                )));
            }
        }
        for (li, hs) in irs_user.iter().enumerate() {
            if hs.len() != k || irs_user_gains[li].len() != k {
                return Err(Error::dim("irs_user", k, hs.len()));
            }
            for (ki, h) in hs.iter().enumerate() {
                if h.len() != m {
                    return Err(Error::dim("irs_user", m, h.len()));
                }
                let mags: Vec<f64> = h.iter().map(|z| z.norm()).collect();
                let hi = mags.iter().cloned().fold(0.0, f64::max);
                let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
                if hi - lo > CONSTANT_MODULUS_RTOL * hi {
                    return Err(Error::InvalidArgument(format!(
                        "h_{li},{ki} entry magnitudes vary ({lo:e}..{hi:e})"
                    )));
                }
            }
        }

        let cascade = (0..k)
            .map(|ki| {
                let mut c = Array2::<C64>::zeros((l * m, n));
                for li in 0..l {
                    let h = &irs_user[li][ki];
                    let g = &bs_irs[li];
                    for mi in 0..m {
                        let hc = h[mi].conj();
                        for j in 0..n {
                            c[[li * m + mi, j]] = hc * g[[mi, j]];
                        }
                    }
                }
                c
            })
            .collect();

        Ok(Self {
            irs_elements: m,
            bs_irs,
            irs_user,
            bs_irs_gains,
            irs_user_gains,
            placement,
            cascade,
        })
    }

    pub fn n_irs(&self) -> usize {
        self.bs_irs.len()
    }
    pub fn irs_elements(&self) -> usize {
        self.irs_elements
    }
    pub fn n_antennas(&self) -> usize {
        self.bs_irs[0].ncols()
    }
    pub fn n_users(&self) -> usize {
        self.irs_user[0].len()
    }
    pub fn theta_len(&self) -> usize {
        self.n_irs() * self.irs_elements
    }
    pub fn bs_irs(&self, l: usize) -> &Array2<C64> {
        &self.bs_irs[l]
    }
    pub fn irs_user(&self, l: usize, k: usize) -> &Array1<C64> {
        &self.irs_user[l][k]
    }
    pub fn bs_irs_gain(&self, l: usize) -> C64 {
        self.bs_irs_gains[l]
    }
    pub fn irs_user_gain(&self, l: usize, k: usize) -> C64 {
        self.irs_user_gains[l][k]
    }
    pub fn placement(&self) -> Option<&Placement> {
        self.placement.as_ref()
    }
    /// Stacked cascade of user `k`, shape `LM x N`.
    pub fn cascade(&self, k: usize) -> &Array2<C64> {
        &self.cascade[k]
    }

    /// Text form: one complex entry per `re,im` token, whitespace separated.
    ///
    /// ```text
    /// irsbeam-channels 1
    /// dims <L> <M> <N> <K>
    /// bs <x> <y>                      (placement lines are optional)
    /// irs <l> <x> <y>
    /// user <k> <x> <y>
    /// G <l> <gamma>                   followed by M lines of N tokens
    /// h <l> <k> <rho>                 followed by one line of M tokens
    /// ```
    pub fn to_text(&self) -> String {
        let (l, m, n, k) = (self.n_irs(), self.irs_elements, self.n_antennas(), self.n_users());
        let mut out = String::new();
        let _ = writeln!(out, "irsbeam-channels 1");
        let _ = writeln!(out, "dims {l} {m} {n} {k}");
        if let Some(p) = &self.placement {
            let _ = writeln!(out, "bs {} {}", p.bs.x, p.bs.y);
            for (i, q) in p.irs.iter().enumerate() {
                let _ = writeln!(out, "irs {i} {} {}", q.x, q.y);
            }
            for (i, q) in p.users.iter().enumerate() {
                let _ = writeln!(out, "user {i} {} {}", q.x, q.y);
            }
        }
        for li in 0..l {
            let _ = writeln!(out, "G {li} {}", fmt_c(self.bs_irs_gains[li]));
            for row in self.bs_irs[li].rows() {
                let line: Vec<String> = row.iter().map(|z| fmt_c(*z)).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        for li in 0..l {
            for ki in 0..k {
                let _ = writeln!(out, "h {li} {ki} {}", fmt_c(self.irs_user_gains[li][ki]));
                let line: Vec<String> = self.irs_user[li][ki].iter().map(|z| fmt_c(*z)).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("channel text: {msg}"));
        let mut lines = text.lines().filter(|s| !s.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("irsbeam-channels 1") => {}
            other => return Err(bad(format!("unexpected header {other:?}"))),
        }
        let dims: Vec<usize> = lines
            .next()
            .and_then(|s| s.strip_prefix("dims "))
            .ok_or_else(|| bad("missing dims line".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad dim {t}"))))
            .collect::<Result<_>>()?;
        let [l, m, n, k] = dims[..] else {
            return Err(bad("dims needs four integers".into()));
        };

        let mut bs = None;
        let mut irs = vec![None; l];
        let mut users = vec![None; k];
        let mut g = vec![None; l];
        let mut gamma = vec![C64::new(0.0, 0.0); l];
        let mut h = vec![vec![None; k]; l];
        let mut rho = vec![vec![C64::new(0.0, 0.0); k]; l];

        let parse_f = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("bad number {t}")));
        let parse_i = |t: &str, bound: usize| -> Result<usize> {
            let v: usize = t.parse().map_err(|_| bad(format!("bad index {t}")))?;
            if v >= bound {
                return Err(bad(format!("index {v} out of range")));
            }
            Ok(v)
        };
        while let Some(line) = lines.next() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["bs", x, y] => bs = Some(Point2::new(parse_f(x)?, parse_f(y)?)),
                ["irs", i, x, y] => irs[parse_i(i, l)?] = Some(Point2::new(parse_f(x)?, parse_f(y)?)),
                ["user", i, x, y] => {
                    users[parse_i(i, k)?] = Some(Point2::new(parse_f(x)?, parse_f(y)?))
                }
                ["G", i, gain] => {
                    let li = parse_i(i, l)?;
                    gamma[li] = parse_c(gain).ok_or_else(|| bad(format!("bad complex {gain}")))?;
                    let mut mat = Array2::<C64>::zeros((m, n));
                    for mi in 0..m {
                        let row = lines.next().ok_or_else(|| bad("truncated G block".into()))?;
                        let vals = parse_row(row, n).ok_or_else(|| bad(format!("bad G row {mi}")))?;
                        for (j, v) in vals.into_iter().enumerate() {
                            mat[[mi, j]] = v;
                        }
                    }
                    g[li] = Some(mat);
                }
                ["h", i, j, gain] => {
                    let (li, ki) = (parse_i(i, l)?, parse_i(j, k)?);
                    rho[li][ki] = parse_c(gain).ok_or_else(|| bad(format!("bad complex {gain}")))?;
                    let row = lines.next().ok_or_else(|| bad("truncated h block".into()))?;
                    let vals = parse_row(row, m).ok_or_else(|| bad("bad h row".into()))?;
                    h[li][ki] = Some(Array1::from(vals));
                }
                _ => return Err(bad(format!("unrecognized line {line:?}"))),
            }
        }

        let g: Vec<Array2<C64>> = g
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| bad("missing G block".into()))?;
        let h: Vec<Vec<Array1<C64>>> = h
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<_>>()
            .ok_or_else(|| bad("missing h block".into()))?;
        let placement = match bs {
            Some(bs) => Some(Placement {
                bs,
                irs: irs
                    .into_iter()
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad("incomplete irs placement".into()))?,
                users: users
                    .into_iter()
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad("incomplete user placement".into()))?,
            }),
            None => None,
        };
        Self::new(g, h, gamma, rho, placement)
    }
}

fn fmt_c(z: C64) -> String {
    format!("{},{}", z.re, z.im)
}

fn parse_c(tok: &str) -> Option<C64> {
    let (re, im) = tok.split_once(',')?;
    Some(C64::new(re.parse().ok()?, im.parse().ok()?))
}

fn parse_row(line: &str, expected: usize) -> Option<Vec<C64>> {
    let vals: Vec<C64> = line.split_whitespace().map(parse_c).collect::<Option<_>>()?;
    (vals.len() == expected).then_some(vals)
}

fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius residual of `a` after projecting every column onto its largest column.
fn rank_one_residual(a: &Array2<C64>) -> f64 {
    let (best, norm2) = a
        .columns()
        .into_iter()
        .enumerate()
        .map(|(j, c)| (j, c.iter().map(|z| z.norm_sqr()).sum::<f64>()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if norm2 == 0.0 {
        return 0.0;
    }
    let u = a.column(best).to_owned();
    let mut res = 0.0;
    for col in a.columns() {
        let coef: C64 = u.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() / norm2;
        res += u
            .iter()
            .zip(col.iter())
            .map(|(a, b)| (b - coef * a).norm_sqr())
            .sum::<f64>();
    }
    res.sqrt()
}

fn random_gain<R: Rng + ?Sized>(
    rng: &mut R,
    path_loss: &PathLoss,
    shadowing: Option<&Normal<f64>>,
    d: f64,
) -> Result<C64> {
    let xi = shadowing.map_or(0.0, |s| s.sample(rng));
    let amp = path_loss.amplitude(d, xi)?;
    let phase = rng.random_range(0.0..TAU);
    Ok(C64::from_polar(amp, phase))
}

/// Draws placement and channels for `cfg`.
///
/// Draw order: for each IRS its BS link (shadowing, phase); then for each
/// IRS and user the IRS-user link.
pub fn sample_scenario<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<(Placement, ChannelSet)> {
    let placement = Placement::from_config(cfg)?;
    let path_loss = PathLoss {
        alpha_db: cfg.path_loss_alpha_db(),
        beta: cfg.path_loss_beta(),
    };
    let var = cfg.shadowing_var_db2();
    let shadowing = if var > 0.0 {
        Some(Normal::new(0.0, var.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let (mx, my, n) = (cfg.irs_rows(), cfg.irs_cols(), cfg.n_bs_antennas());

    let mut bs_irs = Vec::with_capacity(cfg.n_irs());
    let mut gammas = Vec::with_capacity(cfg.n_irs());
    for irs in &placement.irs {
        let gamma = random_gain(rng, &path_loss, shadowing.as_ref(), placement.bs.distance(irs))?;
        let g = bs_irs_channel(
            gamma,
            irs.elevation_to(&placement.bs),
            irs.azimuth_to(&placement.bs),
            placement.bs.azimuth_to(irs),
            mx,
            my,
            n,
        );
        bs_irs.push(g);
        gammas.push(gamma);
    }

    let mut irs_user = Vec::with_capacity(cfg.n_irs());
    let mut rhos = Vec::with_capacity(cfg.n_irs());
    for irs in &placement.irs {
        let mut hs = Vec::with_capacity(cfg.n_users());
        let mut rs = Vec::with_capacity(cfg.n_users());
        for user in &placement.users {
            let rho = random_gain(rng, &path_loss, shadowing.as_ref(), irs.distance(user))?;
            hs.push(irs_user_channel(rho, irs.elevation_to(user), irs.azimuth_to(user), mx, my));
            rs.push(rho);
        }
        irs_user.push(hs);
        rhos.push(rs);
    }

    let channels = ChannelSet::new(bs_irs, irs_user, gammas, rhos, Some(placement.clone()))?;
    Ok((placement, channels))
}
