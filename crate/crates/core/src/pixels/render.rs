use std::f64::consts::TAU;

/// Frame side in pixels.
pub const SIDE: usize = 28;
pub const FRAME_LEN: usize = SIDE * SIDE;
pub const ROD_LENGTH: f64 = 11.0;
pub const ROD_WIDTH: f64 = 2.0;
const SUBSAMPLES: usize = 4;

/// White rod on black, pivoting at the image centre. `theta = 0` hangs
/// straight down; positive angles swing towards +x. Pixel values are the
/// fraction of each pixel covered by the rod, estimated on a 4x4 grid.
pub fn render_pendulum_frame(theta: f64) -> Vec<f32> {
    render_with(theta, SIDE, ROD_LENGTH, ROD_WIDTH)
}

/// Row-major `side x side` frame.
pub fn render_with(theta: f64, side: usize, length: f64, width: f64) -> Vec<f32> {
    let theta = theta.rem_euclid(TAU);
    let (s, c) = theta.sin_cos();
    let centre = side as f64 / 2.0;
    let (dx, dy) = (s * length, c * length);
    let half = width / 2.0;
    let len2 = length * length;
    let inv = 1.0 / (SUBSAMPLES * SUBSAMPLES) as f64;
    let mut frame = vec![0.0f32; side * side];
    for row in 0..side {
        for col in 0..side {
            let mut hits = 0usize;
            for sy in 0..SUBSAMPLES {
                for sx in 0..SUBSAMPLES {
                    let px = col as f64 + (sx as f64 + 0.5) / SUBSAMPLES as f64 - centre;
                    let py = row as f64 + (sy as f64 + 0.5) / SUBSAMPLES as f64 - centre;
                    // Distance from the sample point to the rod segment.
                    let u = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
                    let (ex, ey) = (px - u * dx, py - u * dy);
                    if ex * ex + ey * ey <= half * half {
                        hits += 1;
                    }
                }
            }
            frame[row * side + col] = (hits as f64 * inv) as f32;
        }
    }
    frame
}

/// Plain 8-bit PGM (P5) of a frame with values in `[0, 1]`.
pub fn to_pgm(frame: &[f32], side: usize) -> Vec<u8> {
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(
        frame
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}
