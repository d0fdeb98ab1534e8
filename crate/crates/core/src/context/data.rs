use crate::imagecore::{eligible, ChannelStack, LabelMap, Mask};
use crate::Result;

/// One annotated image (or volume slice) with its channels.
#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub stack: ChannelStack,
    pub labels: LabelMap,
    pub mask: Option<Mask>,
}

impl LabeledImage {
    pub fn new(stack: ChannelStack, labels: LabelMap) -> Self {
        Self {
            stack,
            labels,
            mask: None,
        }
    }

    pub fn eligible(&self) -> Result<Vec<bool>> {
        self.labels.ensure_dims(self.stack.dims())?;
        eligible(&self.labels, self.mask.as_ref())
    }
}

/// Training or test data as volumes of slices; a 2-D image is a one-slice volume.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub volumes: Vec<Vec<LabeledImage>>,
}

impl Dataset {
    pub fn from_images(images: Vec<LabeledImage>) -> Self {
        Self {
            volumes: images.into_iter().map(|i| vec![i]).collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &LabeledImage> {
        self.volumes.iter().flatten()
    }

    pub fn n_slices(&self) -> usize {
        self.volumes.iter().map(Vec::len).sum()
    }

    /// Distinct non-IGNORE labels, ascending.
    pub fn classes(&self) -> Vec<i32> {
        let mut c: Vec<i32> = self
            .slices()
            .flat_map(|s| s.labels.labels().iter().copied())
            .filter(|&l| l != LabelMap::IGNORE)
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}
