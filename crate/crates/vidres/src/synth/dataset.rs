//! On-disk dataset: manifest, builder, loader, disintegration, and the
//! frame/clip samplers feeding the image and video discriminators.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

use super::render::{bytes_to_pixels, read_frame_png, render_frame_bytes, write_frame_png};
use super::{SpriteAction, SpriteShape, SpriteSpec, VideoTensor, HUE_BINS};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Directory (video) or frame file (standalone image), relative to the
    /// manifest location.
    pub path: String,
    pub num_frames: usize,
    pub identity_id: u32,
    pub action_id: u32,
    pub is_image: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub frame_size: (usize, usize),
    pub seed: u64,
    pub videos: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn total_frames(&self) -> usize {
        self.videos.iter().map(|v| v.num_frames).sum()
    }

    pub fn num_images(&self) -> usize {
        self.videos.iter().filter(|v| v.is_image).count()
    }

    pub fn num_videos(&self) -> usize {
        self.videos.iter().filter(|v| !v.is_image).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// Sample a sprite program for video `k` of a build. The identity/action grid
/// is assigned round-robin: shape = k mod 4, action = (k / 4) mod 4,
/// hue bin = (k / 16) mod 4, so 64 videos fill every (shape, action) cell
/// exactly 4 times and every identity cell exactly 4 times.
fn sample_spec(k: usize, frames_per_video: usize, rng: &mut RandomSource) -> SpriteSpec {
    let shape = SpriteShape::ALL[k % 4];
    let action = SpriteAction::ALL[(k / 4) % 4];
    let hue_bin = (k / 16) % HUE_BINS as usize;
    // Identity is a crisp (shape, color scheme) pair: sprite hue at the bin
    // center, background locked to its complement. Position, size and speed
    // stay per-video nuisance variation.
    let hue = (hue_bin as f64 + 0.5) / HUE_BINS as f64;
    let background_hue = (hue + 0.5).rem_euclid(1.0);
    let size = rng.uniform_in(0.22, 0.35);
    let r = size / 2.0;
    let margin = 0.02;
    let horizon = (frames_per_video - 1) as f64;
    match action {
        SpriteAction::TranslateRight => {
            let speed = rng.uniform_in(0.015, 0.04);
            let span = speed * horizon;
            let x0 = rng.uniform_in(r + margin, 1.0 - r - span - margin);
            let y0 = rng.uniform_in(r + margin, 1.0 - r - margin);
            SpriteSpec::new(shape, hue, size, action, speed, (x0, y0), background_hue, frames_per_video)
        }
        SpriteAction::TranslateUp => {
            let speed = rng.uniform_in(0.015, 0.04);
            let span = speed * horizon;
            let x0 = rng.uniform_in(r + margin, 1.0 - r - margin);
            let y0 = rng.uniform_in(r + margin, 1.0 - r - span - margin);
            SpriteSpec::new(shape, hue, size, action, speed, (x0, y0), background_hue, frames_per_video)
        }
        SpriteAction::GrowShrink => {
            let speed = rng.uniform_in(0.08, 0.16);
            let apex = horizon / 2.0;
            let rmax = r * (1.0 + speed * apex);
            let x0 = rng.uniform_in(rmax + margin, 1.0 - rmax - margin);
            let y0 = rng.uniform_in(rmax + margin, 1.0 - rmax - margin);
            SpriteSpec::new(shape, hue, size, action, speed, (x0, y0), background_hue, frames_per_video)
        }
        SpriteAction::Rotate => {
            let speed = rng.uniform_in(0.3, 0.6);
            let x0 = rng.uniform_in(r + margin, 1.0 - r - margin);
            let y0 = rng.uniform_in(r + margin, 1.0 - r - margin);
            SpriteSpec::new(shape, hue, size, action, speed, (x0, y0), background_hue, frames_per_video)
        }
    }
    .expect("sampled sprite programs stay in frame by construction")
}

/// Render a labeled dataset to disk and return its manifest.
///
/// Layout: `<out>/manifest.json`, `<out>/v<k:04>/frame_<t:04>.png`.
/// Rebuilding with identical arguments is byte-identical.
pub fn build_dataset(
    num_videos: usize,
    frames_per_video: usize,
    frame_size: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if num_videos == 0 || frames_per_video == 0 {
        return Err(Error::Contract(
            "need at least one video and one frame per video".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let master = RandomSource::new(seed);
    let mut entries = Vec::with_capacity(num_videos);
    for k in 0..num_videos {
        // Independent per-video stream so videos could be rendered in parallel.
        let mut vrng = master.split(k as u64);
        let spec = sample_spec(k, frames_per_video, &mut vrng);
        let vdir = out_dir.join(format!("v{k:04}"));
        std::fs::create_dir_all(&vdir)?;
        for t in 0..frames_per_video {
            let bytes = render_frame_bytes(&spec, t, frame_size);
            write_frame_png(&vdir.join(format!("frame_{t:04}.png")), &bytes, frame_size, frame_size)?;
        }
        entries.push(ManifestEntry {
            path: format!("v{k:04}"),
            num_frames: frames_per_video,
            identity_id: spec.identity_id(),
            action_id: spec.action_id(),
            is_image: false,
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        frame_size: (frame_size, frame_size),
        seed,
        videos: entries,
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Replace a fraction of the manifest's videos by their individual frames as
/// standalone image entries. Frame files are shared; only bookkeeping changes.
pub fn disintegrate(
    manifest: &DatasetManifest,
    fraction: f64,
    rng: &mut RandomSource,
) -> Result<DatasetManifest> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Contract(format!(
            "fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let video_indices: Vec<usize> = manifest
        .videos
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.is_image)
        .map(|(i, _)| i)
        .collect();
    let k = (fraction * video_indices.len() as f64).round() as usize;
    let mut order = video_indices.clone();
    rng.shuffle(&mut order);
    let chosen: std::collections::BTreeSet<usize> = order.into_iter().take(k).collect();
    let mut out = Vec::new();
    for (i, entry) in manifest.videos.iter().enumerate() {
        if chosen.contains(&i) {
            for t in 0..entry.num_frames {
                out.push(ManifestEntry {
                    path: format!("{}/frame_{t:04}.png", entry.path),
                    num_frames: 1,
                    identity_id: entry.identity_id,
                    action_id: entry.action_id,
                    is_image: true,
                });
            }
        } else {
            out.push(entry.clone());
        }
    }
    Ok(DatasetManifest {
        version: manifest.version,
        frame_size: manifest.frame_size,
        seed: manifest.seed,
        videos: out,
    })
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = if dir.is_dir() {
        dir.join("manifest.json")
    } else {
        dir.to_path_buf()
    };
    let json = std::fs::read_to_string(&path)?;
    let manifest: DatasetManifest = serde_json::from_str(&json)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Config(format!(
            "manifest version {} unsupported (expected {MANIFEST_VERSION})",
            manifest.version
        )));
    }
    Ok(manifest)
}

/// Load one manifest entry as a [`VideoTensor`], validating the invariants.
pub fn load_video_entry(root: &Path, entry: &ManifestEntry) -> Result<VideoTensor> {
    let mut frames: Vec<f32> = Vec::new();
    let (mut h, mut w) = (0, 0);
    if entry.is_image {
        if entry.num_frames != 1 {
            return Err(Error::Contract(format!(
                "image entry {} must have exactly one frame",
                entry.path
            )));
        }
        let (bytes, fh, fw) = read_frame_png(&root.join(&entry.path))?;
        h = fh;
        w = fw;
        frames.extend(bytes_to_pixels(&bytes));
    } else {
        for t in 0..entry.num_frames {
            let path = root.join(&entry.path).join(format!("frame_{t:04}.png"));
            let (bytes, fh, fw) = read_frame_png(&path)?;
            if t == 0 {
                h = fh;
                w = fw;
            } else if (fh, fw) != (h, w) {
                return Err(Error::Contract(format!(
                    "frame size changes within {}",
                    entry.path
                )));
            }
            frames.extend(bytes_to_pixels(&bytes));
        }
    }
    VideoTensor::new(
        frames,
        entry.num_frames,
        h,
        w,
        Some((entry.identity_id, entry.action_id)),
    )
}

/// Fully loaded dataset (desk scale fits comfortably in memory).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    entries: Vec<VideoTensor>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = load_manifest(dir)?;
        let root = if dir.is_dir() {
            dir.to_path_buf()
        } else {
            dir.parent().unwrap_or(Path::new(".")).to_path_buf()
        };
        Dataset::from_manifest(&root, manifest)
    }

    /// Materialize a (possibly rewritten) manifest against an existing
    /// dataset root; used for in-memory disintegration.
    pub fn from_manifest(root: &Path, manifest: DatasetManifest) -> Result<Self> {
        let entries = manifest
            .videos
            .iter()
            .map(|e| load_video_entry(root, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
            entries,
        })
    }

    pub fn entries(&self) -> &[VideoTensor] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &VideoTensor {
        &self.entries[i]
    }

    /// Indices of multi-frame (video) entries.
    pub fn video_indices(&self) -> Vec<usize> {
        self.manifest
            .videos
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_image)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of standalone image entries.
    pub fn image_indices(&self) -> Vec<usize> {
        self.manifest
            .videos
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_image)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn frame_hw(&self) -> (usize, usize) {
        self.manifest.frame_size
    }
}

/// S_1: uniformly random frame of a video. Returns (index, pixels).
pub fn sample_frame_s1<'v>(v: &'v VideoTensor, rng: &mut RandomSource) -> (usize, &'v [f32]) {
    let t = rng.below(v.num_frames() as u64) as usize;
    (t, v.frame(t))
}

/// S_T: uniformly random contiguous clip of `clip_len` frames.
pub fn sample_clip_st(v: &VideoTensor, clip_len: usize, rng: &mut RandomSource) -> Result<VideoTensor> {
    if clip_len == 0 {
        return Err(Error::Contract("clip_len must be >= 1".into()));
    }
    if v.num_frames() < clip_len {
        return Err(Error::Contract(format!(
            "video has {} frames, clip needs {clip_len}",
            v.num_frames()
        )));
    }
    let start = rng.below((v.num_frames() - clip_len + 1) as u64) as usize;
    Ok(v.clip(start, clip_len))
}
