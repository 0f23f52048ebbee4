//! Rigid transforms, twists and wrenches.
//!
//! Twists are `(ω, v)` and wrenches `(m, f)`, angular part first, expressed
//! in body frames. The 6×6 forms of the adjoint and of the Lie bracket are
//! available, but the recursions apply them to vectors directly, which keeps
//! recorded graphs small.

use adiff::Scalar;

pub type Vec3<T> = [T; 3];
pub type Vec6<T> = [T; 6];
pub type Mat3<T> = [[T; 3]; 3];
pub type Mat6<T> = [[T; 6]; 6];

pub fn cross<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn skew<T: Scalar>(a: &Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    [[z, -a[2], a[1]], [a[2], z, -a[0]], [-a[1], a[0], z]]
}

pub fn mat3_vec<T: Scalar>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

pub fn mat3_tr_vec<T: Scalar>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    std::array::from_fn(|i| m[0][i] * v[0] + m[1][i] * v[1] + m[2][i] * v[2])
}

pub fn mat3_mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j]))
}

fn split<T: Copy>(v: &Vec6<T>) -> (Vec3<T>, Vec3<T>) {
    ([v[0], v[1], v[2]], [v[3], v[4], v[5]])
}

fn join<T: Copy>(a: Vec3<T>, b: Vec3<T>) -> Vec6<T> {
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

pub fn vec6_add<T: Scalar>(a: &Vec6<T>, b: &Vec6<T>) -> Vec6<T> {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn vec6_scale<T: Scalar>(a: &Vec6<T>, s: T) -> Vec6<T> {
    std::array::from_fn(|i| a[i] * s)
}

pub fn vec6_dot<T: Scalar>(a: &Vec6<T>, b: &Vec6<T>) -> T {
    adiff::dot(a, b)
}

pub fn mat6_vec<T: Scalar>(m: &Mat6<T>, v: &Vec6<T>) -> Vec6<T> {
    std::array::from_fn(|i| adiff::dot(&m[i], v))
}

pub fn mat6_add<T: Scalar>(a: &Mat6<T>, b: &Mat6<T>) -> Mat6<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn mat6_scale<T: Scalar>(a: &Mat6<T>, s: T) -> Mat6<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
}

pub fn mat6_mul<T: Scalar>(a: &Mat6<T>, b: &Mat6<T>) -> Mat6<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..6).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j])))
}

pub fn mat6_transpose<T: Copy>(a: &Mat6<T>) -> Mat6<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn mat6_identity<T: Scalar>() -> Mat6<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { T::one() } else { T::zero() }))
}

/// `a bᵀ`.
pub fn outer6<T: Scalar>(a: &Vec6<T>, b: &Vec6<T>) -> Mat6<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i] * b[j]))
}

/// Element of SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3<T> {
    pub rot: Mat3<T>,
    pub pos: Vec3<T>,
}

impl<T: Scalar> Se3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Se3 { rot: [[o, z, z], [z, o, z], [z, z, o]], pos: [z, z, z] }
    }

    pub fn translation(p: Vec3<T>) -> Self {
        Se3 { pos: p, ..Self::identity() }
    }

    pub fn mul(&self, o: &Se3<T>) -> Se3<T> {
        let rot = mat3_mul(&self.rot, &o.rot);
        let rp = mat3_vec(&self.rot, &o.pos);
        Se3 { rot, pos: std::array::from_fn(|i| rp[i] + self.pos[i]) }
    }

    pub fn inverse(&self) -> Se3<T> {
        let rot: Mat3<T> = std::array::from_fn(|i| std::array::from_fn(|j| self.rot[j][i]));
        let p = mat3_vec(&rot, &self.pos);
        Se3 { rot, pos: [-p[0], -p[1], -p[2]] }
    }

    pub fn apply(&self, x: &Vec3<T>) -> Vec3<T> {
        let r = mat3_vec(&self.rot, x);
        std::array::from_fn(|i| r[i] + self.pos[i])
    }

    /// `Ad_T V = (Rω, p × Rω + Rv)`.
    pub fn adjoint_apply(&self, v: &Vec6<T>) -> Vec6<T> {
        let (w, lin) = split(v);
        let rw = mat3_vec(&self.rot, &w);
        let rv = mat3_vec(&self.rot, &lin);
        let pxrw = cross(&self.pos, &rw);
        join(rw, std::array::from_fn(|i| pxrw[i] + rv[i]))
    }

    /// `Ad_Tᵀ F = (Rᵀ(m - p × f), Rᵀ f)`.
    pub fn adjoint_transpose_apply(&self, f: &Vec6<T>) -> Vec6<T> {
        let (m, lin) = split(f);
        let pxf = cross(&self.pos, &lin);
        let a: Vec3<T> = std::array::from_fn(|i| m[i] - pxf[i]);
        join(mat3_tr_vec(&self.rot, &a), mat3_tr_vec(&self.rot, &lin))
    }

    /// `Ad_Tᵀ I Ad_T` for a symmetric `I`.
    pub fn congruence(&self, inertia: &Mat6<T>) -> Mat6<T> {
        let mut cols: [Vec6<T>; 6] = [[T::zero(); 6]; 6];
        for (j, col) in cols.iter_mut().enumerate() {
            let e: Vec6<T> = std::array::from_fn(|i| if i == j { T::one() } else { T::zero() });
            let ad_e = self.adjoint_apply(&e);
            *col = self.adjoint_transpose_apply(&mat6_vec(inertia, &ad_e));
        }
        let mut out = [[T::zero(); 6]; 6];
        for i in 0..6 {
            for j in i..6 {
                out[i][j] = cols[j][i];
                out[j][i] = cols[j][i];
            }
        }
        out
    }
}

impl Se3<f64> {
    /// Row-major 4×4 homogeneous matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            m[i][..3].copy_from_slice(&self.rot[i]);
            m[i][3] = self.pos[i];
        }
        m[3][3] = 1.0;
        m
    }

    /// Accepts a homogeneous matrix whose rotation block is orthonormal with
    /// unit determinant to `tol`.
    pub fn from_matrix(m: &[[f64; 4]; 4], tol: f64) -> Option<Self> {
        let rot: Mat3<f64> = std::array::from_fn(|i| [m[i][0], m[i][1], m[i][2]]);
        let rtr = mat3_mul(&std::array::from_fn(|i| std::array::from_fn(|j| rot[j][i])), &rot);
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if (v - if i == j { 1.0 } else { 0.0 }).abs() > tol {
                    return None;
                }
            }
        }
        let det = rot[0][0] * (rot[1][1] * rot[2][2] - rot[1][2] * rot[2][1]) - rot[0][1] * (rot[1][0] * rot[2][2] - rot[1][2] * rot[2][0])
            + rot[0][2] * (rot[1][0] * rot[2][1] - rot[1][1] * rot[2][0]);
        let bottom_ok = m[3][0] == 0.0 && m[3][1] == 0.0 && m[3][2] == 0.0 && m[3][3] == 1.0;
        if (det - 1.0).abs() > tol || !bottom_ok || m.iter().flatten().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Se3 { rot, pos: [m[0][3], m[1][3], m[2][3]] })
    }

    pub fn cast<T: Scalar>(&self) -> Se3<T> {
        Se3 { rot: self.rot.map(|r| r.map(T::cst)), pos: self.pos.map(T::cst) }
    }
}

/// Matrix exponential of the twist `screw · θ`. The screw is a constant;
/// its angular part may have any norm.
pub fn exp_se3<T: Scalar>(screw: &Vec6<f64>, theta: T) -> Se3<T> {
    let w = [screw[0], screw[1], screw[2]];
    let v = [screw[3], screw[4], screw[5]];
    let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if n == 0.0 {
        return Se3::translation(v.map(|vi| theta * vi));
    }
    let wh = w.map(|x| x / n);
    let k = skew(&wh);
    let k2 = mat3_mul(&k, &k);
    let phi = theta * n;
    let (s, c) = (phi.sin(), phi.cos());
    let one_c = -c + 1.0;
    let phi_s = phi - s;
    let rot = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let id = if i == j { 1.0 } else { 0.0 };
            s * k[i][j] + one_c * k2[i][j] + id
        })
    });
    // G(φ) v / n with G = Iφ + (1 - cos φ)K + (φ - sin φ)K²
    let kv = mat3_vec(&k, &v);
    let k2v = mat3_vec(&k2, &v);
    let pos = std::array::from_fn(|i| (phi * v[i] + one_c * kv[i] + phi_s * k2v[i]) / n);
    Se3 { rot, pos }
}

/// 6×6 adjoint representation of `T`.
pub fn adjoint<T: Scalar>(t: &Se3<T>) -> Mat6<T> {
    let mut m = [[T::zero(); 6]; 6];
    let pr = mat3_mul(&skew(&t.pos), &t.rot);
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = t.rot[i][j];
            m[i + 3][j + 3] = t.rot[i][j];
            m[i + 3][j] = pr[i][j];
        }
    }
    m
}

/// 6×6 Lie bracket matrix `ad_V`.
pub fn lie_bracket<T: Scalar>(v: &Vec6<T>) -> Mat6<T> {
    let (w, lin) = split(v);
    let (sw, sv) = (skew(&w), skew(&lin));
    let mut m = [[T::zero(); 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = sw[i][j];
            m[i + 3][j + 3] = sw[i][j];
            m[i + 3][j] = sv[i][j];
        }
    }
    m
}

/// `ad_V X = (ω × x_ω, v × x_ω + ω × x_v)`.
pub fn ad_apply<T: Scalar>(v: &Vec6<T>, x: &Vec6<T>) -> Vec6<T> {
    let (w, lin) = split(v);
    let (xw, xv) = split(x);
    let a = cross(&w, &xw);
    let b = cross(&lin, &xw);
    let c = cross(&w, &xv);
    join(a, std::array::from_fn(|i| b[i] + c[i]))
}

/// `ad_Vᵀ F = (-(ω × m) - v × f, -(ω × f))`.
pub fn ad_transpose_apply<T: Scalar>(v: &Vec6<T>, f: &Vec6<T>) -> Vec6<T> {
    let (w, lin) = split(v);
    let (m, fl) = split(f);
    let a = cross(&w, &m);
    let b = cross(&lin, &fl);
    let c = cross(&w, &fl);
    join(std::array::from_fn(|i| -a[i] - b[i]), c.map(|x| -x))
}

/// Spatial inertia in a body frame, for a body whose centre of mass sits at
/// `com` in that frame and whose rotational inertia about the centre of mass
/// is `inertia_com`, expressed in the body axes.
pub fn spatial_inertia<T: Scalar>(mass: T, com: &Vec3<T>, inertia_com: &Mat3<T>) -> Mat6<T> {
    let c = skew(com);
    let cc = mat3_mul(&c, &c);
    let mut g = [[T::zero(); 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = inertia_com[i][j] - mass * cc[i][j];
            g[i][j + 3] = mass * c[i][j];
            g[i + 3][j] = -(mass * c[i][j]);
        }
        g[i + 3][i + 3] = mass;
    }
    g
}

/// Mass and centre of mass encoded in a spatial inertia.
pub fn mass_and_com(g: &Mat6<f64>) -> (f64, Vec3<f64>) {
    let m = g[3][3];
    // upper right block is m [c]
    (m, [g[2][4] / m, g[0][5] / m, g[1][3] / m])
}

pub fn cast6<T: Scalar>(v: &Vec6<f64>) -> Vec6<T> {
    v.map(T::cst)
}

pub fn cast66<T: Scalar>(m: &Mat6<f64>) -> Mat6<T> {
    m.map(|r| r.map(T::cst))
}

pub fn values66<T: Scalar>(m: &Mat6<T>) -> Option<Mat6<f64>> {
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            out[i][j] = m[i][j].as_f64()?;
        }
    }
    Some(out)
}
