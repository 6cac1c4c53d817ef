//! Smooth star-shaped domains of the plane.
//!
//! Every domain is described by a radial profile `kappa(theta) > 0` so that the
//! boundary is `gamma(theta) = kappa(theta) (cos theta, sin theta)`. The disk
//! is the constant profile. Closest-point projection onto the boundary, the
//! signed distance and the differential of the projection are provided for
//! points of a tubular neighbourhood of the boundary.

use std::f64::consts::PI;

use crate::{Error, Mat2, Point2, Result};

const TWO_PI: f64 = 2.0 * PI;
const PROFILE_SAMPLES: usize = 4096;
const SCAN_SAMPLES: usize = 256;
const NEWTON_MAX_ITER: usize = 60;

/// Boundary profile of a domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Disk { radius: f64 },
    /// `kappa(theta) = 1 + alpha cos(theta) + beta sin(theta) + beta/2 sin(3 theta)`.
    StarCurve { alpha: f64, beta: f64 },
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Point2,
    /// Boundary parameter of `point`, in `[0, 2 pi)`.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothDomain {
    kind: DomainKind,
    /// Stationarity tolerance of the closest-point search (length units).
    pub closest_point_tol: f64,
    kappa_min: f64,
    max_curvature: f64,
}

impl SmoothDomain {
    pub fn new(kind: DomainKind) -> Result<Self> {
        match kind {
            DomainKind::Disk { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::BadParameter(format!("disk radius must be positive, got {radius}")));
                }
            }
            DomainKind::StarCurve { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::BadParameter("star curve coefficients must be finite".into()));
                }
            }
        }
        let mut dom = SmoothDomain {
            kind,
            closest_point_tol: 1e-12,
            kappa_min: f64::INFINITY,
            max_curvature: 0.0,
        };
        for i in 0..PROFILE_SAMPLES {
            let theta = TWO_PI * i as f64 / PROFILE_SAMPLES as f64;
            let k = dom.kappa(theta);
            if !(k > 0.0) {
                return Err(Error::BadParameter(format!(
                    "radial profile is not positive at theta = {theta:.6} (kappa = {k:.3e})"
                )));
            }
            dom.kappa_min = dom.kappa_min.min(k);
            dom.max_curvature = dom.max_curvature.max(dom.curvature(theta).abs());
        }
        Ok(dom)
    }

    pub fn unit_disk() -> Self {
        Self::disk(1.0).expect("unit disk is valid")
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(DomainKind::Disk { radius })
    }

    /// The non-convex, non-symmetric test domain with the given coefficients.
    pub fn flower(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(DomainKind::StarCurve { alpha, beta })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn is_disk(&self) -> bool {
        matches!(self.kind, DomainKind::Disk { .. })
    }

    /// `(kappa, kappa', kappa'')` at `theta`.
    pub fn kappa_derivatives(&self, theta: f64) -> (f64, f64, f64) {
        match self.kind {
            DomainKind::Disk { radius } => (radius, 0.0, 0.0),
            DomainKind::StarCurve { alpha, beta } => {
                let (s, c) = theta.sin_cos();
                let (s3, c3) = (3.0 * theta).sin_cos();
                (
                    1.0 + alpha * c + beta * s + 0.5 * beta * s3,
                    -alpha * s + beta * c + 1.5 * beta * c3,
                    -alpha * c - beta * s - 4.5 * beta * s3,
                )
            }
        }
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        self.kappa_derivatives(theta).0
    }

    /// `gamma(theta)`.
    pub fn boundary_point(&self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        self.kappa(theta) * Point2::new(c, s)
    }

    /// `(gamma, gamma', gamma'')` at `theta`.
    pub fn boundary_derivatives(&self, theta: f64) -> (Point2, Point2, Point2) {
        let (k, dk, ddk) = self.kappa_derivatives(theta);
        let (s, c) = theta.sin_cos();
        let e = Point2::new(c, s);
        let t = Point2::new(-s, c);
        (k * e, dk * e + k * t, ddk * e + 2.0 * dk * t - k * e)
    }

    /// Signed curvature of the boundary (positive where convex).
    pub fn curvature(&self, theta: f64) -> f64 {
        let (_, d1, d2) = self.boundary_derivatives(theta);
        (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3)
    }

    /// Outward unit normal at `theta`.
    pub fn normal(&self, theta: f64) -> Point2 {
        let (_, d1, _) = self.boundary_derivatives(theta);
        Point2::new(d1.y, -d1.x) / d1.norm()
    }

    /// Minimum of the radial profile.
    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    /// Conservative width of the tubular neighbourhood where the projection
    /// is unique: the smallest radius of curvature.
    pub fn tube_width(&self) -> f64 {
        if self.max_curvature > 0.0 {
            1.0 / self.max_curvature
        } else {
            f64::INFINITY
        }
    }

    /// Whether `x` lies in the open domain.
    pub fn contains(&self, x: &Point2) -> bool {
        let theta = x.y.atan2(x.x);
        x.norm() < self.kappa(theta)
    }

    /// Exact area of the domain.
    pub fn area(&self) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => PI * radius * radius,
            // 1/2 int kappa^2: the cross terms of the trigonometric polynomial vanish.
            DomainKind::StarCurve { alpha, beta } => {
                PI * (1.0 + 0.5 * (alpha * alpha + beta * beta + 0.25 * beta * beta))
            }
        }
    }

    /// Length of the boundary (trapezoidal rule, spectrally accurate for the
    /// periodic integrand).
    pub fn perimeter(&self) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => TWO_PI * radius,
            DomainKind::StarCurve { .. } => {
                let n = 4096;
                let dt = TWO_PI / n as f64;
                (0..n)
                    .map(|i| self.boundary_derivatives(i as f64 * dt).1.norm())
                    .sum::<f64>()
                    * dt
            }
        }
    }

    /// Orthogonal projection `b(x)` of `x` onto the boundary.
    pub fn closest_point(&self, x: &Point2) -> Result<ClosestPoint> {
        match self.kind {
            DomainKind::Disk { radius } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::NoConvergence { x: x.x, y: x.y });
                }
                Ok(ClosestPoint {
                    point: x * (radius / r),
                    theta: reduce_angle(x.y.atan2(x.x)),
                })
            }
            DomainKind::StarCurve { .. } => self.closest_point_generic(x),
        }
    }

    /// Closest point by 1D minimisation of `|x - gamma(theta)|^2`, valid for
    /// every profile.
    pub fn closest_point_generic(&self, x: &Point2) -> Result<ClosestPoint> {
        let theta0 = x.y.atan2(x.x);
        let local = self.newton(x, theta0);
        let near = self.kappa_min * 0.05;
        let best = match local {
            Some(theta) if (x - self.boundary_point(theta)).norm() <= near => theta,
            _ => self.global_search(x, local)?,
        };
        let theta = reduce_angle(best);
        Ok(ClosestPoint {
            point: self.boundary_point(theta),
            theta,
        })
    }

    /// Signed distance to the boundary, negative inside the domain.
    pub fn signed_distance(&self, x: &Point2) -> Result<f64> {
        let cp = self.closest_point(x)?;
        let diff = x - cp.point;
        let dist = diff.norm();
        let side = diff.dot(&self.normal(cp.theta));
        Ok(if side < 0.0 { -dist } else { dist })
    }

    /// Projection together with its differential `Db(x)`.
    ///
    /// With `theta*(x)` characterised by `(x - gamma) . gamma' = 0`, implicit
    /// differentiation gives `Db = gamma' gamma'^T / (|gamma'|^2 - (x - gamma) . gamma'')`.
    pub fn projection_with_differential(&self, x: &Point2) -> Result<(Point2, Mat2)> {
        let cp = self.closest_point(x)?;
        let (g, d1, d2) = self.boundary_derivatives(cp.theta);
        let denom = d1.norm_squared() - (x - g).dot(&d2);
        if !(denom > 0.0) {
            return Err(Error::NoConvergence { x: x.x, y: x.y });
        }
        Ok((cp.point, d1 * d1.transpose() / denom))
    }

    fn stationarity(&self, x: &Point2, theta: f64) -> (f64, f64, f64) {
        let (g, d1, d2) = self.boundary_derivatives(theta);
        let diff = x - g;
        // derivative and second derivative of |x - gamma|^2 / 2
        (-diff.dot(&d1), d1.norm_squared() - diff.dot(&d2), d1.norm())
    }

    fn newton(&self, x: &Point2, theta0: f64) -> Option<f64> {
        let mut theta = theta0;
        for _ in 0..NEWTON_MAX_ITER {
            let (g1, g2, speed) = self.stationarity(x, theta);
            if g1.abs() <= self.closest_point_tol * speed {
                return if g2 > 0.0 { Some(theta) } else { None };
            }
            if !(g2 > 0.0) {
                return None;
            }
            let step = (-g1 / g2).clamp(-0.25, 0.25);
            theta += step;
        }
        let (g1, g2, speed) = self.stationarity(x, theta);
        (g1.abs() <= 10.0 * self.closest_point_tol * speed.max(1.0) && g2 > 0.0).then_some(theta)
    }

    fn global_search(&self, x: &Point2, local: Option<f64>) -> Result<f64> {
        let dist2 = |t: f64| (x - self.boundary_point(t)).norm_squared();
        let dt = TWO_PI / SCAN_SAMPLES as f64;
        let samples: Vec<f64> = (0..SCAN_SAMPLES).map(|i| dist2(i as f64 * dt)).collect();
        let mut candidates: Vec<f64> = local.into_iter().collect();
        for i in 0..SCAN_SAMPLES {
            let prev = samples[(i + SCAN_SAMPLES - 1) % SCAN_SAMPLES];
            let next = samples[(i + 1) % SCAN_SAMPLES];
            if samples[i] <= prev && samples[i] <= next {
                let t = i as f64 * dt;
                let refined = golden_section(&dist2, t - dt, t + dt, 1e-10);
                if let Some(polished) = self.newton(x, refined) {
                    candidates.push(polished);
                } else {
                    let (g1, _, speed) = self.stationarity(x, refined);
                    if g1.abs() <= self.closest_point_tol * speed {
                        candidates.push(refined);
                    }
                }
            }
        }
        candidates
            .into_iter()
            .min_by(|a, b| dist2(*a).total_cmp(&dist2(*b)))
            .ok_or(Error::NoConvergence { x: x.x, y: x.y })
    }
}

/// Reduce an angle to `[0, 2 pi)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TWO_PI);
    if t >= TWO_PI {
        0.0
    } else {
        t
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
