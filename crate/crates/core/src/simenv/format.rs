//! Line-oriented scene serialization.
//!
//! ```text
//! scene v1 <width> <height> <n_targets>
//! wall <x> <y>                      one line per wall cell, row-major
//! obj <x> <y> <rank|-> <P> <hex>    patch values as little-endian f64
//! start <x> <y> <N|E|S|W>
//! ```

use std::path::Path;

use thiserror::Error;

use super::{AgentPose, AppearancePatch, GridScene, SceneObject};
use crate::grid::{Cell, Heading};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn scene_to_string<T: Real>(scene: &GridScene<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scene v1 {} {} {}\n",
        scene.width(),
        scene.height(),
        scene.n_targets()
    ));
    for c in scene.wall_cells() {
        out.push_str(&format!("wall {} {}\n", c.x, c.y));
    }
    for obj in scene.objects() {
        let rank = obj
            .target_rank
            .map_or_else(|| "-".to_string(), |r| r.to_string());
        out.push_str(&format!(
            "obj {} {} {} {} {}\n",
            obj.cell.x,
            obj.cell.y,
            rank,
            obj.appearance.size(),
            obj.appearance.to_hex()
        ));
    }
    let start = scene.start_pose();
    out.push_str(&format!(
        "start {} {} {}\n",
        start.cell.x,
        start.cell.y,
        start.heading.code()
    ));
    out
}

pub fn scene_from_str<T: Real>(text: &str) -> Result<GridScene<T>, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_no, header) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 5 || head[0] != "scene" || head[1] != "v1" {
        return Err(parse_err(header_no, "expected `scene v1 <w> <h> <n_targets>`"));
    }
    let dim = |s: &str| -> Result<u32, FormatError> {
        s.parse().map_err(|_| parse_err(header_no, format!("bad number `{s}`")))
    };
    let (width, height, n_targets) = (dim(head[2])?, dim(head[3])?, dim(head[4])?);
    if width == 0 || height == 0 {
        return Err(parse_err(header_no, "zero dimension"));
    }

    let mut walls = vec![false; (width * height) as usize];
    let mut objects: Vec<SceneObject<T>> = Vec::new();
    let mut start: Option<AgentPose> = None;

    for (no, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let coord = |s: &str| -> Result<i32, FormatError> {
            s.parse().map_err(|_| parse_err(no, format!("bad coordinate `{s}`")))
        };
        match tok[0] {
            "wall" => {
                if tok.len() != 3 {
                    return Err(parse_err(no, "expected `wall <x> <y>`"));
                }
                let c = Cell::new(coord(tok[1])?, coord(tok[2])?);
                if c.x < 0 || c.y < 0 || c.x as u32 >= width || c.y as u32 >= height {
                    return Err(parse_err(no, format!("wall {c} out of bounds")));
                }
                walls[(c.y as u32 * width + c.x as u32) as usize] = true;
            }
            "obj" => {
                if tok.len() != 6 {
                    return Err(parse_err(no, "expected `obj <x> <y> <rank|-> <P> <hex>`"));
                }
                let cell = Cell::new(coord(tok[1])?, coord(tok[2])?);
                let target_rank = if tok[3] == "-" {
                    None
                } else {
                    Some(
                        tok[3]
                            .parse::<u32>()
                            .map_err(|_| parse_err(no, format!("bad rank `{}`", tok[3])))?,
                    )
                };
                let size: usize = tok[4]
                    .parse()
                    .map_err(|_| parse_err(no, format!("bad patch size `{}`", tok[4])))?;
                let patch = AppearancePatch::from_hex(tok[5])
                    .ok_or_else(|| parse_err(no, "bad patch hex"))?;
                if patch.size() != size {
                    return Err(parse_err(
                        no,
                        format!("patch size {} does not match declared {size}", patch.size()),
                    ));
                }
                objects.push(SceneObject {
                    cell,
                    appearance: patch,
                    target_rank,
                });
            }
            "start" => {
                if tok.len() != 4 {
                    return Err(parse_err(no, "expected `start <x> <y> <N|E|S|W>`"));
                }
                if start.is_some() {
                    return Err(parse_err(no, "duplicate start line"));
                }
                let heading = tok[3]
                    .chars()
                    .next()
                    .and_then(Heading::from_code)
                    .filter(|_| tok[3].len() == 1)
                    .ok_or_else(|| parse_err(no, format!("bad heading `{}`", tok[3])))?;
                start = Some(AgentPose {
                    cell: Cell::new(coord(tok[1])?, coord(tok[2])?),
                    heading,
                });
            }
            other => return Err(parse_err(no, format!("unknown record `{other}`"))),
        }
    }

    let start = start.ok_or_else(|| parse_err(0, "missing start line"))?;
    GridScene::from_parts(width, height, walls, objects, start, n_targets)
        .map_err(|msg| parse_err(0, msg))
}

pub fn save_scene<T: Real>(scene: &GridScene<T>, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, scene_to_string(scene))?;
    Ok(())
}

pub fn load_scene<T: Real>(path: &Path) -> Result<GridScene<T>, FormatError> {
    scene_from_str(&std::fs::read_to_string(path)?)
}
