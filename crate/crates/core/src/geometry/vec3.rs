//! Small helpers over `[f64; 3]`.

pub type Vec3 = [f64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    dist2(a, b).sqrt()
}

/// Unit vector along `a`, or `None` for a zero vector.
pub fn normalized(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

#[inline]
pub fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    add(a, scale(sub(b, a), t))
}

/// Angle between two vectors in radians, robust near 0 and pi.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b))
}

/// Axis-aligned bounding box of a point set; `None` when empty.
pub fn bounds<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<(Vec3, Vec3)> {
    let mut it = points.into_iter();
    let first = *it.next()?;
    let (mut lo, mut hi) = (first, first);
    for p in it {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}

/// Row-major 3x3 rotation about a unit axis (Rodrigues).
pub fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

#[inline]
pub fn mat_vec(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

/// Rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid {
    pub rot: [[f64; 3]; 3],
    pub trans: Vec3,
}

impl Rigid {
    pub const IDENTITY: Rigid = Rigid {
        rot: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        trans: [0.0; 3],
    };

    pub fn translation(t: Vec3) -> Rigid {
        Rigid {
            trans: t,
            ..Rigid::IDENTITY
        }
    }

    /// Rotation by `angle` about the line through `point` with unit `axis`.
    pub fn about_axis(axis: Vec3, point: Vec3, angle: f64) -> Rigid {
        let rot = rotation(axis, angle);
        // x -> R (x - p) + p
        let trans = sub(point, mat_vec(&rot, point));
        Rigid { rot, trans }
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(mat_vec(&self.rot, p), self.trans)
    }

    #[inline]
    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.rot, v)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Rigid) -> Rigid {
        Rigid {
            rot: mat_mul(&self.rot, &other.rot),
            trans: self.apply(other.trans),
        }
    }
}
