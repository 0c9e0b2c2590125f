//! Iso-contour extraction from scalar pixel fields via marching squares.

use std::collections::HashMap;

/// Extract iso-lines of `field` (sampled at pixel centers) at `level`.
///
/// Returns chained polylines in pixel-center coordinates. A pixel counts as
/// inside when its value is strictly greater than the level; saddle cells are
/// resolved by the cell-center average.
pub fn marching_squares(field: &[f32], width: u32, height: u32, level: f64) -> Vec<Vec<[f64; 2]>> {
    assert_eq!(field.len(), width as usize * height as usize);
    if width < 2 || height < 2 {
        return Vec::new();
    }
    let value = |x: u32, y: u32| field[y as usize * width as usize + x as usize] as f64;
    let mut segments: Vec<([f64; 2], [f64; 2])> = Vec::new();

    for y in 0..height - 1 {
        for x in 0..width - 1 {
            let tl = value(x, y);
            let tr = value(x + 1, y);
            let br = value(x + 1, y + 1);
            let bl = value(x, y + 1);
            let mut case = 0u8;
            if tl > level {
                case |= 1;
            }
            if tr > level {
                case |= 2;
            }
            if br > level {
                case |= 4;
            }
            if bl > level {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            let fx = x as f64 + 0.5;
            let fy = y as f64 + 0.5;
            let lerp = |a: f64, b: f64| (level - a) / (b - a);
            // Crossing points on the four cell edges.
            let e0 = [fx + lerp(tl, tr), fy]; // top
            let e1 = [fx + 1.0, fy + lerp(tr, br)]; // right
            let e2 = [fx + lerp(bl, br), fy + 1.0]; // bottom
            let e3 = [fx, fy + lerp(tl, bl)]; // left
            let mut push = |a: [f64; 2], b: [f64; 2]| segments.push((a, b));
            match case {
                1 => push(e3, e0),
                2 => push(e0, e1),
                3 => push(e3, e1),
                4 => push(e1, e2),
                5 => {
                    let center = (tl + tr + br + bl) / 4.0;
                    if center > level {
                        push(e0, e1);
                        push(e3, e2);
                    } else {
                        push(e3, e0);
                        push(e1, e2);
                    }
                }
                6 => push(e0, e2),
                7 => push(e3, e2),
                8 => push(e2, e3),
                9 => push(e0, e2),
                10 => {
                    let center = (tl + tr + br + bl) / 4.0;
                    if center > level {
                        push(e0, e3);
                        push(e1, e2);
                    } else {
                        push(e0, e1);
                        push(e2, e3);
                    }
                }
                11 => push(e1, e2),
                12 => push(e1, e3),
                13 => push(e0, e1),
                14 => push(e3, e0),
                _ => unreachable!(),
            }
        }
    }
    chain_segments(&segments)
}

fn key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64)
}

/// Join raw segments into polylines by shared endpoints.
fn chain_segments(segments: &[([f64; 2], [f64; 2])]) -> Vec<Vec<[f64; 2]>> {
    let mut by_end: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        by_end.entry(key(*a)).or_default().push(i);
        by_end.entry(key(*b)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut line = vec![a, b];
        // Extend forward from the tail, then backward from the head.
        for _ in 0..2 {
            loop {
                let tail = *line.last().unwrap();
                let Some(cands) = by_end.get(&key(tail)) else { break };
                let next = cands.iter().copied().find(|&i| !used[i]);
                let Some(i) = next else { break };
                used[i] = true;
                let (sa, sb) = segments[i];
                if key(sa) == key(tail) {
                    line.push(sb);
                } else {
                    line.push(sa);
                }
            }
            line.reverse();
        }
        out.push(line);
    }
    out
}
