//! Dataset manifests: one TOML file listing training and test files.
//!
//! ```toml
//! root = "data"
//!
//! [[classes]]
//! value = 255
//! label = 1
//! name = "foreground"
//!
//! [[classes]]
//! value = 0
//! label = -1
//! name = "background"
//!
//! [[train.items]]
//! image = "train/a.png"
//! labels = "train/a_gt.png"
//! mask = "train/a_mask.png"
//! channels = { membrane = "train/a_membrane.png" }
//!
//! [[test.volumes]]
//! slices = [{ image = "vol/z0.png", labels = "vol/z0_gt.png" }, { image = "vol/z1.png", labels = "vol/z1_gt.png" }]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::{Dataset, LabeledImage};
use crate::imagecore::io::{load_float_plane, load_grayscale, load_label_map, load_raw_values};
use crate::imagecore::{
    compute_feature_channels, ChannelKind, ChannelStack, FeatureSpec, ImagePlane, LabelMap, Mask,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    /// Pixel value in the label images.
    pub value: u16,
    pub label: i32,
    #[serde(default)]
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemEntry {
    pub image: PathBuf,
    /// Optional for prediction-only data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    /// External channels by name; `.kfp` files are float planes, anything
    /// else is read as a grayscale image.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub channels: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEntry {
    /// Slices in z order.
    pub slices: Vec<ItemEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitEntry {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<ItemEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub volumes: Vec<VolumeEntry>,
}

impl SplitEntry {
    /// Volumes of entries; every 2-D item is a one-slice volume.
    pub fn volumes(&self) -> Vec<Vec<&ItemEntry>> {
        self.items
            .iter()
            .map(|i| vec![i])
            .chain(self.volumes.iter().map(|v| v.slices.iter().collect()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Base directory for relative paths; defaults to the manifest's directory.
    #[serde(default)]
    pub root: Option<PathBuf>,
    #[serde(default = "default_classes")]
    pub classes: Vec<ClassEntry>,
    #[serde(default)]
    pub train: SplitEntry,
    #[serde(default)]
    pub test: SplitEntry,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            root: None,
            classes: default_classes(),
            train: SplitEntry::default(),
            test: SplitEntry::default(),
        }
    }
}

fn default_classes() -> Vec<ClassEntry> {
    vec![
        ClassEntry {
            value: 0,
            label: LabelMap::NEGATIVE,
            name: "background".into(),
        },
        ClassEntry {
            value: 255,
            label: LabelMap::POSITIVE,
            name: "foreground".into(),
        },
    ]
}

/// How raw files become channel stacks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadOptions {
    /// Keep raw integer intensities instead of scaling to [0, 1].
    pub raw_intensities: bool,
    pub features: FeatureSpec,
}

/// A loaded item; `labels` is absent for unlabeled data.
pub struct LoadedItem {
    pub stack: ChannelStack,
    pub labels: Option<LabelMap>,
    pub mask: Option<Mask>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let m: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let root = match &m.root {
            Some(r) => dir.join(r),
            None => dir.to_path_buf(),
        };
        Ok((m, root))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn class_table(&self) -> Vec<(u16, i32)> {
        self.classes.iter().map(|c| (c.value, c.label)).collect()
    }

    pub fn load_item(
        &self,
        root: &Path,
        item: &ItemEntry,
        opts: &LoadOptions,
    ) -> Result<LoadedItem> {
        let p = |f: &Path| root.join(f);
        let image = if opts.raw_intensities {
            let (w, h, v) = load_raw_values(&p(&item.image))?;
            ImagePlane::new(w, h, v.into_iter().map(f64::from).collect())?
        } else {
            load_grayscale(&p(&item.image))?
        };
        let dims = image.dims();
        let mut stack = ChannelStack::from_image(image.clone());
        stack.extend_from(&compute_feature_channels(&image, &opts.features)?)?;
        for (name, file) in &item.channels {
            let file = p(file);
            let plane = if file.extension().is_some_and(|e| e == "kfp") {
                load_float_plane(&file)?
            } else {
                load_grayscale(&file)?
            };
            stack.push(name.clone(), ChannelKind::External, plane)?;
        }
        let labels = match &item.labels {
            Some(f) => {
                let l = load_label_map(&p(f), &self.class_table())?;
                l.ensure_dims(dims)?;
                Some(l)
            }
            None => None,
        };
        let mask = match &item.mask {
            Some(f) => {
                let (w, h, v) = load_raw_values(&p(f))?;
                let m = Mask::new(w, h, v.into_iter().map(|x| x != 0).collect())?;
                if m.dims() != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims,
                        found: m.dims(),
                    });
                }
                Some(m)
            }
            None => None,
        };
        Ok(LoadedItem {
            stack,
            labels,
            mask,
        })
    }

    /// Loads a split as a labeled dataset; every item needs a label file.
    pub fn load_dataset(
        &self,
        root: &Path,
        split: &SplitEntry,
        opts: &LoadOptions,
    ) -> Result<Dataset> {
        let volumes = split
            .volumes()
            .into_iter()
            .map(|vol| {
                vol.into_iter()
                    .map(|item| {
                        let l = self.load_item(root, item, opts)?;
                        let labels = l.labels.ok_or_else(|| {
                            Error::Config(format!("{} has no label file", item.image.display()))
                        })?;
                        Ok(LabeledImage {
                            stack: l.stack,
                            labels,
                            mask: l.mask,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { volumes })
    }
}
