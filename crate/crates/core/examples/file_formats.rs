//! Writing and reading ASCII PLY and XYZ clouds with header comments.

use pcdenoise::cloud::{format_ply, parse_ply, parse_xyz, save_cloud_with_comments};
use pcdenoise::{load_cloud, CloudFormat, PointCloud};

fn main() -> pcdenoise::Result<()> {
    let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.5, -2.25, 1e-9], [0.1, 0.2, 0.3]])?;
    let comments = vec!["sigma = 0.1".to_string(), "seed = 42".to_string()];

    let ply = format_ply(&cloud, &comments);
    print!("{ply}");
    assert_eq!(parse_ply(&ply)?, cloud);

    let dir = std::env::temp_dir().join("pcdenoise-file-formats");
    std::fs::create_dir_all(&dir).map_err(|e| pcdenoise::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("cloud.xyz");
    save_cloud_with_comments(&cloud, &path, CloudFormat::Xyz, &comments)?;
    let back = load_cloud(&path, CloudFormat::from_path(&path))?;
    println!("xyz round trip exact: {}", back == cloud);

    let other_props = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
                       property float z\nproperty uchar red\nend_header\n1 2 3 255\n";
    println!("extra properties skipped: {:?}", parse_ply(other_props)?.positions()[0]);
    println!("malformed xyz: {}", parse_xyz("1 2\n").unwrap_err());
    Ok(())
}
