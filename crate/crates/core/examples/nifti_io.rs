//! Reading and writing NIfTI-1 volumes, plain or gzip-compressed.
//!
//! Pass a `.nii` / `.nii.gz` path to inspect it; otherwise a phantom is
//! written and read back.

use headmotion::simulate::make_phantom;
use headmotion::volume_io::{read_nifti, write_nifti, Modality};

fn main() -> headmotion::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let mut v = make_phantom([32, 32, 24], [4.0, 4.0, 5.0], 0)?;
            v.modality = Modality::T1;
            let p = dir.path().join("phantom.nii.gz");
            write_nifti(&v, &p)?;
            p
        }
    };

    let v = read_nifti(&path)?;
    let (lo, hi) = v.data().iter().fold((u16::MAX, 0), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    println!("{}", path.display());
    println!("  dims       {:?}", v.dims());
    println!("  voxel (mm) {:?}", v.voxel_size());
    println!("  modality   {}", v.modality.as_str());
    println!("  intensity  {lo}..={hi}");

    let copy = dir.path().join("copy.nii");
    write_nifti(&v, &copy)?;
    println!("  round trip equal: {}", read_nifti(&copy)? == v);
    Ok(())
}
