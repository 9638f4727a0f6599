//! On-disk library layout: one directory per category holding
//! `interface.skill` and one `<site>.skill` per implementation, plus a
//! top-level `creation.log` with one `<step>\t<skill-id>` line per skill in
//! creation order.

use super::{SiteImplementation, SkillId, SkillLibrary};
use crate::dsl::{parse_skill_file, print_implementation, print_interface, DslError, ParsedFile};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{source}")]
    Parse { path: PathBuf, source: DslError },
    #[error("creation.log line {line} is malformed: `{text}`")]
    BadLogLine { line: usize, text: String },
    #[error("library layout error: {0}")]
    Layout(String),
}

fn write_file(path: &Path, contents: &str) -> Result<(), StoreError> {
    fs::write(path, contents).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the library under `dir`, replacing any previous contents.
pub fn save_library(lib: &SkillLibrary, dir: &Path) -> Result<(), StoreError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|source| StoreError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    for iface in lib.interfaces.values() {
        let cat_dir = dir.join(&iface.category);
        fs::create_dir_all(&cat_dir).map_err(|source| StoreError::Io {
            path: cat_dir.clone(),
            source,
        })?;
        write_file(&cat_dir.join("interface.skill"), &print_interface(iface))?;
    }
    for imp in lib.implementations.values() {
        if imp.site == "interface" {
            return Err(StoreError::Layout(
                "site id `interface` collides with the interface file".into(),
            ));
        }
        let Some(iface) = lib.interface_by_id(&imp.implements) else {
            return Err(StoreError::Layout(format!(
                "implementation `{}` references unknown interface `{}`",
                imp.id, imp.implements
            )));
        };
        let cat_dir = dir.join(&iface.category);
        fs::create_dir_all(&cat_dir).map_err(|source| StoreError::Io {
            path: cat_dir.clone(),
            source,
        })?;
        write_file(
            &cat_dir.join(format!("{}.skill", imp.site)),
            &print_implementation(imp),
        )?;
    }

    let mut log = String::new();
    for id in &lib.creation_log {
        let step = lib.lookup(id).map(|d| d.created_at).unwrap_or(0);
        log.push_str(&format!("{step}\t{id}\n"));
    }
    write_file(&dir.join("creation.log"), &log)
}

/// Load a library directory written by [`save_library`]. Structural problems
/// that are representable (e.g. a log entry without a definition) are left
/// for [`super::validate_library`]; only unreadable layouts fail here.
pub fn load_library(dir: &Path) -> Result<SkillLibrary, StoreError> {
    let log_path = dir.join("creation.log");
    let mut creation_log = Vec::new();
    let mut steps: BTreeMap<SkillId, u64> = BTreeMap::new();
    if log_path.exists() {
        for (i, line) in read_file(&log_path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line.split_once('\t').and_then(|(step, id)| {
                Some((step.parse::<u64>().ok()?, id.parse::<SkillId>().ok()?))
            });
            let Some((step, id)) = parsed else {
                return Err(StoreError::BadLogLine {
                    line: i + 1,
                    text: line.to_string(),
                });
            };
            steps.insert(id.clone(), step);
            creation_log.push(id);
        }
    }

    let mut interfaces = Vec::new();
    let mut implementations = Vec::new();
    let entries = fs::read_dir(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut cat_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    cat_dirs.sort();
    for cat_dir in cat_dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&cat_dir)
            .map_err(|source| StoreError::Io {
                path: cat_dir.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "skill"))
            .collect();
        files.sort();
        for path in files {
            let src = read_file(&path)?;
            let parsed = parse_skill_file(&src).map_err(|source| StoreError::Parse {
                path: path.clone(),
                source,
            })?;
            match parsed {
                ParsedFile::Interface(mut iface) => {
                    for def in &mut iface.default_methods {
                        let id = SkillId::default_method(&iface.id, &def.signature.name);
                        def.created_at = steps.get(&id).copied().unwrap_or(0);
                    }
                    interfaces.push(iface);
                }
                ParsedFile::Implementation(mut imp) => {
                    restore_created_at(&mut imp, &steps);
                    implementations.push(imp);
                }
            }
        }
    }
    Ok(SkillLibrary::from_raw_parts(
        interfaces,
        implementations,
        creation_log,
    ))
}

fn restore_created_at(imp: &mut SiteImplementation, steps: &BTreeMap<SkillId, u64>) {
    let mut min_step = u64::MAX;
    let implements = imp.implements.clone();
    let site = imp.site.clone();
    for (name, def) in imp.methods.iter_mut() {
        let id = SkillId::concrete(&implements, name, &site);
        def.created_at = steps.get(&id).copied().unwrap_or(0);
        min_step = min_step.min(def.created_at);
    }
    imp.created_at = if min_step == u64::MAX { 0 } else { min_step };
}
