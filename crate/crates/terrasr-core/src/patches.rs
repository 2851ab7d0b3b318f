//! Patch sampling, LR/HR pair construction, and the dataset split rule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{RasterGrid, ScenePair};
use crate::resample::bicubic_downsample;
use crate::util::fnv1a64;

/// One training example: the LR input, the HR reference it was derived
/// from, and the height grid aligned to the HR reference.
#[derive(Debug, Clone)]
pub struct PatchPair {
    pub lr: RasterGrid,
    pub hr: RasterGrid,
    pub hr_ndsm: RasterGrid,
    pub scale: usize,
}

/// Randomly sample `count` aligned (rgb, ndsm) windows of `patch_px` from a
/// scene. Windows containing any nodata pixel are rejected and redrawn.
/// Deterministic under `rng_seed`.
pub fn crop_patches(
    scene: &ScenePair,
    patch_px: usize,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<(RasterGrid, RasterGrid)>> {
    if patch_px == 0 || count == 0 {
        return Err(Error::usage("patch size and count must be positive"));
    }
    if scene.rgb.height < patch_px || scene.rgb.width < patch_px {
        return Err(Error::usage(format!(
            "scene {} ({}x{}) is smaller than the requested {patch_px} px patch",
            scene.id, scene.rgb.height, scene.rgb.width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let max_y = scene.rgb.height - patch_px;
    let max_x = scene.rgb.width - patch_px;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let attempt_cap = 1000 + 100 * count;
    while out.len() < count {
        attempts += 1;
        if attempts > attempt_cap {
            return Err(Error::data(format!(
                "gave up after {attempt_cap} draws: scene {} has too much nodata \
                 to yield {count} clean {patch_px} px patches",
                scene.id
            )));
        }
        let y0 = rng.random_range(0..=max_y);
        let x0 = rng.random_range(0..=max_x);
        let rgb = scene.rgb.crop(y0, x0, patch_px, patch_px)?;
        let ndsm = scene.ndsm.crop(y0, x0, patch_px, patch_px)?;
        if rgb.has_any_nodata() || ndsm.has_any_nodata() {
            continue;
        }
        out.push((rgb, ndsm));
    }
    Ok(out)
}

/// Derive the LR input of every crop by bicubic downsampling of the HR rgb;
/// the height grid passes through untouched (it belongs to the HR side).
pub fn make_pairs(crops: Vec<(RasterGrid, RasterGrid)>, scale: usize) -> Result<Vec<PatchPair>> {
    if scale != 4 && scale != 8 {
        return Err(Error::usage(format!("scale must be 4 or 8, got {scale}")));
    }
    crops
        .into_iter()
        .map(|(hr, hr_ndsm)| {
            let lr = bicubic_downsample(&hr, scale)?;
            Ok(PatchPair { lr, hr, hr_ndsm, scale })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::data(format!("unknown split {other:?}"))),
        }
    }
}

/// Deterministic 80/10/10 split, independent of input order: scenes are
/// ranked by the FNV-1a hash of their id (ties broken by the id itself);
/// the lowest tenth (at least one scene) becomes test, the next tenth val,
/// the rest train. Adding scenes never reorders existing hash ranks more
/// than their insertion demands, so reruns over a grown dataset keep most
/// assignments stable.
pub fn assign_splits(ids: &[String]) -> Result<Vec<Split>> {
    let n = ids.len();
    if n < 3 {
        return Err(Error::usage(format!(
            "need at least 3 scenes to form train/val/test splits, got {n}"
        )));
    }
    let n_test = (n / 10).max(1);
    let n_val = (n / 10).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (fnv1a64(ids[i].as_bytes()), ids[i].as_str()));
    let mut out = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_test {
            Split::Test
        } else if rank < n_test + n_val {
            Split::Val
        } else {
            Split::Train
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_scene;

    #[test]
    fn full_scene_patch_is_the_identity_window() {
        let scene = generate_scene(1, 64).unwrap();
        let crops = crop_patches(&scene, 64, 1, 123).unwrap();
        assert_eq!(crops.len(), 1);
        assert_eq!(crops[0].0.values, scene.rgb.values);
        assert_eq!(crops[0].1.values, scene.ndsm.values);
    }

    #[test]
    fn same_seed_gives_identical_windows() {
        let scene = generate_scene(2, 128).unwrap();
        let a = crop_patches(&scene, 32, 8, 7).unwrap();
        let b = crop_patches(&scene, 32, 8, 7).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.0.values, pb.0.values);
        }
        let c = crop_patches(&scene, 32, 8, 8).unwrap();
        assert!(a.iter().zip(&c).any(|(pa, pc)| pa.0.values != pc.0.values));
    }

    #[test]
    fn windows_stay_in_bounds_and_stay_aligned() {
        let scene = generate_scene(3, 192).unwrap();
        let crops = crop_patches(&scene, 96, 8, 42).unwrap();
        assert_eq!(crops.len(), 8);
        for (rgb, ndsm) in &crops {
            assert_eq!((rgb.height, rgb.width), (96, 96));
            // Same window on both grids: geo origins must agree.
            assert_eq!(rgb.geo.as_ref().unwrap().origin_x, ndsm.geo.as_ref().unwrap().origin_x);
            assert_eq!(rgb.geo.as_ref().unwrap().origin_y, ndsm.geo.as_ref().unwrap().origin_y);
        }
    }

    #[test]
    fn nodata_windows_are_rejected() {
        let mut scene = generate_scene(4, 128).unwrap();
        // Poison the left half of the rgb grid.
        let mut mask = vec![false; 128 * 128];
        for y in 0..128 {
            for x in 0..64 {
                mask[y * 128 + x] = true;
            }
        }
        scene.rgb.nodata_mask = Some(mask);
        let crops = crop_patches(&scene, 32, 6, 5).unwrap();
        for (rgb, _) in &crops {
            assert!(!rgb.has_any_nodata());
        }
        // A scene that is all nodata cannot satisfy the request.
        scene.rgb.nodata_mask = Some(vec![true; 128 * 128]);
        assert!(crop_patches(&scene, 32, 1, 5).is_err());
    }

    #[test]
    fn pairs_have_exact_scale_relation() {
        let scene = generate_scene(5, 128).unwrap();
        let crops = crop_patches(&scene, 64, 3, 11).unwrap();
        let pairs = make_pairs(crops, 4).unwrap();
        for p in &pairs {
            assert_eq!(p.hr.height, 4 * p.lr.height);
            assert_eq!(p.hr.width, 4 * p.lr.width);
            assert_eq!((p.hr_ndsm.height, p.hr_ndsm.width), (p.hr.height, p.hr.width));
        }
        let crops = crop_patches(&scene, 64, 1, 11).unwrap();
        assert!(make_pairs(crops, 3).is_err());
    }

    #[test]
    fn splits_have_exact_proportions_and_are_order_independent() {
        let ids: Vec<String> = (0..10).map(|i| format!("scene-{i:04}")).collect();
        let splits = assign_splits(&ids).unwrap();
        let count = |s: Split| splits.iter().filter(|&&x| x == s).count();
        assert_eq!(count(Split::Train), 8);
        assert_eq!(count(Split::Val), 1);
        assert_eq!(count(Split::Test), 1);

        let mut shuffled = ids.clone();
        shuffled.reverse();
        let splits2 = assign_splits(&shuffled).unwrap();
        for (i, id) in ids.iter().enumerate() {
            let j = shuffled.iter().position(|s| s == id).unwrap();
            assert_eq!(splits[i], splits2[j], "split for {id} depends on order");
        }
    }

    #[test]
    fn tiny_datasets_still_get_all_three_splits() {
        let ids: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let splits = assign_splits(&ids).unwrap();
        for want in [Split::Train, Split::Val, Split::Test] {
            assert!(splits.contains(&want));
        }
        assert!(assign_splits(&ids[..2]).is_err());
    }
}
