use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Aligned per-modality feature matrices with per-instance category labels.
/// Row p of the image and text blocks is the matched pair (i_p, t_p).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    image: Tensor2,
    text: Tensor2,
    labels: Vec<usize>,
    category_names: Vec<String>,
}

impl FeatureDataset {
    pub fn new(
        image: Array2<f64>,
        text: Array2<f64>,
        labels: Vec<usize>,
        category_names: Vec<String>,
    ) -> Result<Self> {
        if image.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if image.nrows() != text.nrows() || image.nrows() != labels.len() {
            return Err(Error::Shape {
                context: "FeatureDataset",
                expected: format!("{} rows in every block", image.nrows()),
                got: format!("text {} rows, {} labels", text.nrows(), labels.len()),
            });
        }
        let classes = category_names.len();
        for &label in &labels {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        if image.iter().chain(text.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Shape {
                context: "FeatureDataset",
                expected: "finite features".into(),
                got: "non-finite entry".into(),
            });
        }
        Ok(FeatureDataset {
            image,
            text,
            labels,
            category_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.category_names.len()
    }

    pub fn d_img(&self) -> usize {
        self.image.ncols()
    }

    pub fn d_txt(&self) -> usize {
        self.text.ncols()
    }

    pub fn image(&self) -> &Tensor2 {
        &self.image
    }

    pub fn text(&self) -> &Tensor2 {
        &self.text
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn category_names(&self) -> &[String] {
        &self.category_names
    }

    /// Number of distinct categories actually present.
    pub fn distinct_categories(&self) -> usize {
        let mut seen = vec![false; self.classes()];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// New dataset holding the given rows, pairing preserved.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let image = ndarray::stack(
            ndarray::Axis(0),
            &indices.iter().map(|&i| self.image.row(i)).collect::<Vec<_>>(),
        )
        .map_err(|_| Error::EmptyDataset)?;
        let text = ndarray::stack(
            ndarray::Axis(0),
            &indices.iter().map(|&i| self.text.row(i)).collect::<Vec<_>>(),
        )
        .map_err(|_| Error::EmptyDataset)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        FeatureDataset::new(image, text, labels, self.category_names.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|c| format!("class_{c}")).collect()
    }

    #[test]
    fn rejects_empty_and_misaligned_blocks() {
        let e = FeatureDataset::new(
            Array2::zeros((0, 2)),
            Array2::zeros((0, 2)),
            vec![],
            names(2),
        )
        .unwrap_err();
        assert!(matches!(e, Error::EmptyDataset));

        let e = FeatureDataset::new(
            Array2::zeros((2, 2)),
            Array2::zeros((3, 2)),
            vec![0, 0],
            names(2),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Shape { .. }));
    }

    #[test]
    fn rejects_labels_out_of_range_and_non_finite_values() {
        let e = FeatureDataset::new(
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            vec![0, 2],
            names(2),
        )
        .unwrap_err();
        assert!(matches!(e, Error::LabelOutOfRange { label: 2, classes: 2 }));

        let e = FeatureDataset::new(
            array![[1.0, f64::NAN]],
            array![[0.0, 0.0]],
            vec![0],
            names(1),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Shape { .. }));
    }

    #[test]
    fn subset_preserves_pairing() {
        let ds = FeatureDataset::new(
            array![[0.0], [1.0], [2.0], [3.0]],
            array![[10.0], [11.0], [12.0], [13.0]],
            vec![0, 1, 0, 1],
            names(2),
        )
        .unwrap();
        let sub = ds.subset(&[3, 1]).unwrap();
        assert_eq!(sub.image(), &array![[3.0], [1.0]]);
        assert_eq!(sub.text(), &array![[13.0], [11.0]]);
        assert_eq!(sub.labels(), &[1, 1]);
        assert_eq!(sub.distinct_categories(), 1);
    }
}
