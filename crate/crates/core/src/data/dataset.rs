//! Scanpath CSV files and their image index.
//!
//! `fixations.csv` holds one fixation per row
//! (`image_id,observer_id,fix_index,x,y`, native pixel coordinates). The
//! images it refers to are listed in a sibling index `fixations.images.csv`
//! with columns `image_id,width,height,split,pixels`, where `pixels` is an
//! optional PGM path relative to the index file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pgm::{read_pgm, write_pgm, GrayImage};
use crate::error::{Error, Result};
use crate::types::{GazePoint, GridSpec, Scanpath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Parameter(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub split: Split,
    /// Row-major 8-bit grayscale, `width * height` bytes.
    pub pixels: Option<Vec<u8>>,
}

impl ImageInfo {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageInfo>,
    pub scanpaths: Vec<Scanpath>,
}

impl Dataset {
    pub fn image(&self, id: &str) -> Option<&ImageInfo> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Each image in index order with its scanpaths in file order.
    pub fn grouped(&self) -> Vec<(&ImageInfo, Vec<&Scanpath>)> {
        let mut by_id: HashMap<&str, Vec<&Scanpath>> = HashMap::new();
        for s in &self.scanpaths {
            by_id.entry(s.image_id.as_str()).or_default().push(s);
        }
        self.images
            .iter()
            .map(|i| (i, by_id.remove(i.id.as_str()).unwrap_or_default()))
            .collect()
    }

    pub fn scanpaths_for(&self, id: &str) -> Vec<&Scanpath> {
        self.scanpaths.iter().filter(|s| s.image_id == id).collect()
    }

    /// Images of one split and their scanpaths.
    pub fn split(&self, split: Split) -> Dataset {
        let images: Vec<ImageInfo> = self.images.iter().filter(|i| i.split == split).cloned().collect();
        let scanpaths = self
            .scanpaths
            .iter()
            .filter(|s| images.iter().any(|i| i.id == s.image_id))
            .cloned()
            .collect();
        Dataset { images, scanpaths }
    }

    /// Every scanpath refers to a known image and stays inside it.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for img in &self.images {
            GridSpec::new(img.width, img.height)?;
            if seen.insert(img.id.as_str(), img).is_some() {
                return Err(Error::Format(format!("image '{}' listed twice", img.id)));
            }
            if let Some(px) = &img.pixels {
                if px.len() != img.width * img.height {
                    return Err(Error::Format(format!(
                        "image '{}' has {} pixels, expected {}",
                        img.id,
                        px.len(),
                        img.width * img.height
                    )));
                }
            }
        }
        for s in &self.scanpaths {
            let img = seen
                .get(s.image_id.as_str())
                .ok_or_else(|| Error::Format(format!("unknown image_id '{}'", s.image_id)))?;
            s.check_bounds(img.grid())?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FixationRow {
    image_id: String,
    observer_id: String,
    fix_index: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageRow {
    image_id: String,
    width: usize,
    height: usize,
    split: String,
    pixels: String,
}

/// `dir/name.csv` -> `dir/name.images.csv`.
pub fn index_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scanpaths");
    csv_path.with_file_name(format!("{stem}.images.csv"))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_index(path: &Path) -> Result<Vec<ImageInfo>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for rec in rdr.deserialize::<ImageRow>() {
        let row = rec.map_err(|e| csv_err(path, e))?;
        let split = Split::parse(&row.split).map_err(|e| parse_err(path, out.len() as u64 + 2, e.to_string()))?;
        let pixels = if row.pixels.is_empty() {
            None
        } else {
            let img = read_pgm(&base.join(&row.pixels))?;
            if img.width != row.width || img.height != row.height {
                return Err(Error::Format(format!(
                    "{}: {}x{} pixels for a {}x{} image",
                    row.pixels, img.width, img.height, row.width, row.height
                )));
            }
            Some(img.pixels)
        };
        out.push(ImageInfo {
            id: row.image_id,
            width: row.width,
            height: row.height,
            split,
            pixels,
        });
    }
    Ok(out)
}

/// Reads a scanpath CSV and its image index.
pub fn load_scanpath_dataset(path: &Path) -> Result<Dataset> {
    let index = index_path(path);
    if !index.exists() {
        return Err(Error::Format(format!("missing image index {}", index.display())));
    }
    let images = read_index(&index)?;
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let mut scanpaths: Vec<Scanpath> = Vec::new();
    let mut last_index = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: FixationRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        if !(row.x.is_finite() && row.y.is_finite()) {
            return Err(parse_err(path, line, "non-finite coordinate"));
        }
        let point = GazePoint::new(row.x, row.y);
        let continues = scanpaths
            .last()
            .is_some_and(|s| s.image_id == row.image_id && s.observer_id == row.observer_id)
            && row.fix_index != 0;
        if continues {
            if row.fix_index != last_index + 1 {
                return Err(parse_err(
                    path,
                    line,
                    format!("fix_index {} follows {last_index}", row.fix_index),
                ));
            }
            scanpaths.last_mut().expect("checked above").points.push(point);
        } else {
            if row.fix_index != 0 {
                return Err(parse_err(
                    path,
                    line,
                    format!("scanpath starts at fix_index {}", row.fix_index),
                ));
            }
            if !images.iter().any(|i| i.id == row.image_id) {
                return Err(parse_err(path, line, format!("unknown image_id '{}'", row.image_id)));
            }
            scanpaths.push(Scanpath::new(row.image_id, row.observer_id, vec![point]));
        }
        last_index = row.fix_index;
    }
    let d = Dataset { images, scanpaths };
    d.validate()?;
    Ok(d)
}

/// Writes the scanpath CSV, its image index and, for images with pixels, one
/// PGM per image in `<stem>_images/`.
pub fn write_scanpath_dataset(path: &Path, d: &Dataset) -> Result<()> {
    d.validate()?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for s in &d.scanpaths {
        for (i, p) in s.points.iter().enumerate() {
            w.serialize(FixationRow {
                image_id: s.image_id.clone(),
                observer_id: s.observer_id.clone(),
                fix_index: i,
                x: p.x,
                y: p.y,
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    if d.scanpaths.is_empty() {
        w.write_record(["image_id", "observer_id", "fix_index", "x", "y"])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let index = index_path(path);
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scanpaths");
    let img_dir = format!("{stem}_images");
    let mut w = csv::Writer::from_path(&index).map_err(|e| csv_err(&index, e))?;
    for img in &d.images {
        let pixels = match &img.pixels {
            Some(px) => {
                let dir = index.with_file_name(&img_dir);
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let rel = format!("{img_dir}/{}.pgm", img.id);
                write_pgm(
                    &index.with_file_name(&rel),
                    &GrayImage {
                        width: img.width,
                        height: img.height,
                        pixels: px.clone(),
                    },
                )?;
                rel
            }
            None => String::new(),
        };
        w.serialize(ImageRow {
            image_id: img.id.clone(),
            width: img.width,
            height: img.height,
            split: img.split.as_str().into(),
            pixels,
        })
        .map_err(|e| csv_err(&index, e))?;
    }
    if d.images.is_empty() {
        w.write_record(["image_id", "width", "height", "split", "pixels"])
            .map_err(|e| csv_err(&index, e))?;
    }
    w.flush().map_err(|e| Error::io(&index, e))
}
