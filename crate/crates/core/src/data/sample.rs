use super::DiagnosisGrade;
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

pub const FLIP_SUFFIX: &str = "_hflip";

/// One preprocessed image and its label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `[h, w, 1]`, values in `[0, 1]`.
    pub pixels: Tensor<f32>,
    pub grade: DiagnosisGrade,
    pub augmented: bool,
}

impl Sample {
    pub fn new(id: impl Into<String>, pixels: Tensor<f32>, grade: DiagnosisGrade) -> Result<Self> {
        match pixels.dims() {
            [_, _, 1] => {}
            _ => return Err(shape_err!("sample pixels must be [h,w,1], got {}", pixels.shape())),
        }
        if !pixels.data().iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(crate::Error::Data("sample pixels must lie in [0, 1]".into()));
        }
        Ok(Self { id: id.into(), pixels, grade, augmented: false })
    }
}

/// Mirrors the image left-to-right. The grade is kept and the id gets a
/// `_hflip` suffix. Flipping pixels twice restores them bitwise.
pub fn hflip_augment(s: &Sample) -> Sample {
    let dims = s.pixels.dims();
    let (h, w, c) = (dims[0], dims[1], dims[2]);
    let src = s.pixels.data();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in (0..w).rev() {
            out.extend_from_slice(&src[(y * w + x) * c..(y * w + x + 1) * c]);
        }
    }
    Sample {
        id: format!("{}{FLIP_SUFFIX}", s.id),
        pixels: Tensor::from_vec(dims, out).expect("flip preserves shape"),
        grade: s.grade,
        augmented: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(w: usize, f: impl Fn(usize, usize) -> f32) -> Sample {
        let h = 3;
        let data = (0..h * w).map(|i| f(i / w, i % w)).collect();
        Sample::new("s", Tensor::from_vec(&[h, w, 1], data).unwrap(), DiagnosisGrade::new(3).unwrap()).unwrap()
    }

    #[test]
    fn flip_is_involution_and_keeps_grade() {
        let s = sample(5, |y, x| (y * 5 + x) as f32 / 20.0);
        let f = hflip_augment(&s);
        assert_eq!(f.grade, s.grade);
        assert!(f.augmented);
        assert_eq!(f.id, "s_hflip");
        assert_eq!(hflip_augment(&f).pixels, s.pixels);
    }

    #[test]
    fn left_bright_becomes_right_bright() {
        let s = sample(4, |_, x| if x < 2 { 1.0 } else { 0.0 });
        let f = hflip_augment(&s);
        for row in f.pixels.data().chunks(4) {
            assert_eq!(row, &[0.0, 0.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        let t = Tensor::from_vec(&[1, 1, 1], vec![1.5f32]).unwrap();
        assert!(Sample::new("x", t, DiagnosisGrade::new(0).unwrap()).is_err());
    }
}
