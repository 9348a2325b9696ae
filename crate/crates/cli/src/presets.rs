use crate::config::ConfigLayer;

/// A named experiment: a partial configuration layered over the defaults.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub layer: ConfigLayer,
}

pub const SET2_DATASETS: [&str; 3] = ["emnist", "kmnist", "kmnist49"];
pub const DIRTINESS_LEVELS: [f64; 3] = [0.0, 0.3, 0.5];
pub const OVERLAP_LEVELS: [f64; 3] = [0.0, 0.3, 0.5];
pub const CLIENT_COUNTS: [usize; 4] = [20, 30, 40, 50];

/// `0.3` -> `"03"`.
fn level_tag(v: f64) -> String {
    format!("{:02}", (v * 10.0).round() as u32)
}

pub fn smoke_synthetic() -> ConfigLayer {
    ConfigLayer {
        dataset: Some("synthetic".into()),
        synthetic_classes: Some(5),
        synthetic_dim: Some(16),
        synthetic_separation: Some(0.5),
        n_clients: Some(10),
        samples_per_cluster: Some(100),
        dirtiness: Some(0.3),
        seeds: Some(vec![0, 1, 2]),
        ..Default::default()
    }
}

/// Every preset, in catalog order.
pub fn catalog() -> Vec<Preset> {
    let mut out = vec![Preset {
        name: "smoke-synthetic".into(),
        description: "5 Gaussian classes in 16-D, N=10, S=100, dirtiness 0.3, 3 seeds".into(),
        layer: smoke_synthetic(),
    }];
    for ds in SET2_DATASETS {
        for d in DIRTINESS_LEVELS {
            out.push(Preset {
                name: format!("set2-{ds}-d{}", level_tag(d)),
                description: format!("{ds}, dirtiness {d}, N=25, S=500, overlap 0"),
                layer: ConfigLayer {
                    dataset: Some(ds.into()),
                    dirtiness: Some(d),
                    overlap: Some(0.0),
                    ..Default::default()
                },
            });
        }
    }
    for o in OVERLAP_LEVELS {
        out.push(Preset {
            name: format!("set3-emnist-o{}", level_tag(o)),
            description: format!("emnist, overlap {o}, dirtiness 0.3, N=25, S=500"),
            layer: ConfigLayer {
                dataset: Some("emnist".into()),
                dirtiness: Some(0.3),
                overlap: Some(o),
                ..Default::default()
            },
        });
    }
    for n in CLIENT_COUNTS {
        out.push(Preset {
            name: format!("set4-emnist-n{n}"),
            description: format!("emnist, N={n}, dirtiness 0.3, S=500, overlap 0"),
            layer: ConfigLayer {
                dataset: Some("emnist".into()),
                dirtiness: Some(0.3),
                n_clients: Some(n),
                ..Default::default()
            },
        });
    }
    out
}

pub fn find(name: &str) -> Option<Preset> {
    catalog().into_iter().find(|p| p.name == name)
}
