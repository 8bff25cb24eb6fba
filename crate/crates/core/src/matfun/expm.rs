use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_square, Mat};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub(crate) fn norm1(m: &Mat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential `e^{A t}` by scaling and squaring with a diagonal
/// Padé approximant of degree 3 to 13.
pub fn expm(a: &Mat, t: f64) -> Result<Mat> {
    let n = check_square(a, "expm")?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("expm: time {t} is not finite")));
    }
    check_finite(a, "expm input")?;
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let at = a * t;
    let nrm = norm1(&at);
    if nrm == 0.0 {
        return Ok(Mat::identity(n, n));
    }
    let id = Mat::identity(n, n);
    let a2 = &at * &at;

    let small = |b: &[f64]| -> (Mat, Mat) {
        let m = b.len() - 1;
        let mut u = &id * b[1];
        let mut v = &id * b[0];
        let mut pow = id.clone();
        for k in 1..=(m / 2) {
            pow = &pow * &a2;
            u += &pow * b[2 * k + 1];
            v += &pow * b[2 * k];
        }
        (&at * u, v)
    };

    let (u, v, s) = if nrm <= THETA_3 {
        let (u, v) = small(&B3);
        (u, v, 0)
    } else if nrm <= THETA_5 {
        let (u, v) = small(&B5);
        (u, v, 0)
    } else if nrm <= THETA_7 {
        let (u, v) = small(&B7);
        (u, v, 0)
    } else if nrm <= THETA_9 {
        let (u, v) = small(&B9);
        (u, v, 0)
    } else {
        let s = (nrm / THETA_13).log2().ceil().max(0.0) as i32;
        let scale = 2f64.powi(-s);
        let a1 = &at * scale;
        let a2 = &a1 * &a1;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = &B13;
        let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
            + &a6 * b[7]
            + &a4 * b[5]
            + &a2 * b[3]
            + &id * b[1];
        let u = &a1 * u_inner;
        let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
            + &a6 * b[6]
            + &a4 * b[4]
            + &a2 * b[2]
            + &id * b[0];
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::MatFun("expm: singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    check_finite(&r, "expm result")?;
    Ok(r)
}

/// Fréchet derivative of the exponential at `A` in direction `E`,
/// read off the upper-right block of `exp([[A, E], [0, A]])`.
pub fn expm_frechet(a: &Mat, e: &Mat) -> Result<Mat> {
    let n = check_square(a, "expm_frechet")?;
    if e.shape() != (n, n) {
        return Err(Error::dim(
            "expm_frechet",
            format!("direction is {}x{}, expected {n}x{n}", e.nrows(), e.ncols()),
        ));
    }
    let en = e.norm();
    if en == 0.0 {
        return Ok(Mat::zeros(n, n));
    }
    let scale = a.norm().max(1.0) / en;
    let mut block = Mat::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(a);
    block.view_mut((n, n), (n, n)).copy_from(a);
    block.view_mut((0, n), (n, n)).copy_from(&(e * scale));
    let x = expm(&block, 1.0)?;
    Ok(x.view((0, n), (n, n)).into_owned() / scale)
}
