//! Cross-modal retrieval and metrics: cosine ranking, average precision,
//! MAP aggregation, and the bi-modal / all-modal task drivers.

use ndarray::ArrayView1;

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::model::{CmGanModel, Modality};
use crate::nn::{Mode, Tensor2};

/// One query's ranking: candidate ids in descending similarity (ties broken by
/// ascending id) with per-rank relevance flags.
#[derive(Debug, Clone)]
pub struct RankedList {
    pub query: usize,
    pub candidates: Vec<usize>,
    pub relevance: Vec<bool>,
}

/// Per-task MAP scores. Averages are the arithmetic mean of their components.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub map_i2t: f64,
    pub map_t2i: f64,
    pub map_bi_avg: f64,
    pub map_i2all: f64,
    pub map_t2all: f64,
    pub map_all_avg: f64,
    /// Queries skipped because they had zero relevant candidates.
    pub skipped_queries: usize,
    /// True when the test set has a single category, making MAP trivially 1.
    pub degenerate_single_category: bool,
}

/// a·b / (‖a‖‖b‖). Zero vectors have no defined direction.
pub fn cosine_similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context: "cosine_similarity",
            expected: format!("{} dims", a.len()),
            got: format!("{} dims", b.len()),
        });
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.dot(&b) / (na * nb))
}

/// AP = (1/R) Σ_k (R_k/k)·rel_k over the full ranked list.
pub fn average_precision(relevance: &[bool]) -> Result<f64> {
    let total_relevant = relevance.iter().filter(|&&r| r).count();
    if total_relevant == 0 {
        return Err(Error::UndefinedAp);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / total_relevant as f64)
}

/// Mean AP over queries with at least one relevant item; queries with none
/// are skipped and counted.
pub fn map_score(lists: &[RankedList]) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut valid = 0usize;
    let mut skipped = 0usize;
    for list in lists {
        match average_precision(&list.relevance) {
            Ok(ap) => {
                sum += ap;
                valid += 1;
            }
            Err(Error::UndefinedAp) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if valid == 0 {
        return Err(Error::NoValidQueries);
    }
    Ok((sum / valid as f64, skipped))
}

/// Argsort by descending similarity; equal scores order by ascending id.
pub fn rank_by_similarity(similarities: &[f64], ids: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..similarities.len()).collect();
    order.sort_by(|&a, &b| {
        similarities[b]
            .partial_cmp(&similarities[a])
            .expect("finite similarities")
            .then(ids[a].cmp(&ids[b]))
    });
    order.into_iter().map(|k| ids[k]).collect()
}

fn rank_one_query(
    query: usize,
    query_rep: ArrayView1<f64>,
    query_label: usize,
    candidates: &[(usize, ArrayView1<f64>, usize)],
) -> Result<RankedList> {
    let mut sims = Vec::with_capacity(candidates.len());
    let mut ids = Vec::with_capacity(candidates.len());
    for (id, rep, _) in candidates {
        sims.push(cosine_similarity(query_rep, *rep)?);
        ids.push(*id);
    }
    let ranked = rank_by_similarity(&sims, &ids);
    let label_of: std::collections::HashMap<usize, usize> =
        candidates.iter().map(|(id, _, l)| (*id, *l)).collect();
    let relevance = ranked.iter().map(|id| label_of[id] == query_label).collect();
    Ok(RankedList {
        query,
        candidates: ranked,
        relevance,
    })
}

/// Encodes a test set into the common space (inference mode) and runs the
/// image→text and text→image tasks. Relevance is shared category label.
pub fn bimodal_retrieval(
    model: &mut CmGanModel,
    testset: &FeatureDataset,
) -> Result<(f64, f64, usize)> {
    let s_img = model.encode(Modality::Image, testset.image(), Mode::Infer)?;
    let s_txt = model.encode(Modality::Text, testset.text(), Mode::Infer)?;
    bimodal_from_common(&s_img, &s_txt, testset.labels())
}

/// Bi-modal MAP from precomputed common representations.
pub fn bimodal_from_common(
    s_img: &Tensor2,
    s_txt: &Tensor2,
    labels: &[usize],
) -> Result<(f64, f64, usize)> {
    let n = labels.len();
    let text_pool: Vec<_> = (0..n).map(|q| (q, s_txt.row(q), labels[q])).collect();
    let image_pool: Vec<_> = (0..n).map(|q| (q, s_img.row(q), labels[q])).collect();

    let mut i2t = Vec::with_capacity(n);
    let mut t2i = Vec::with_capacity(n);
    for (q, &label) in labels.iter().enumerate() {
        i2t.push(rank_one_query(q, s_img.row(q), label, &text_pool)?);
        t2i.push(rank_one_query(q, s_txt.row(q), label, &image_pool)?);
    }
    let (map_i2t, skip_a) = map_score(&i2t)?;
    let (map_t2i, skip_b) = map_score(&t2i)?;
    Ok((map_i2t, map_t2i, skip_a + skip_b))
}

/// All-modal tasks: the candidate pool is every test image and text common
/// representation. When `exclude_query` is set (the default protocol), the
/// query instance itself is dropped from its pool; its paired instance in the
/// other modality remains a legitimate target.
pub fn allmodal_retrieval(
    model: &mut CmGanModel,
    testset: &FeatureDataset,
    exclude_query: bool,
) -> Result<(f64, f64, usize)> {
    let s_img = model.encode(Modality::Image, testset.image(), Mode::Infer)?;
    let s_txt = model.encode(Modality::Text, testset.text(), Mode::Infer)?;
    allmodal_from_common(&s_img, &s_txt, testset.labels(), exclude_query)
}

/// All-modal MAP from precomputed common representations. Pool ids: image q
/// is id q, text q is id n+q.
pub fn allmodal_from_common(
    s_img: &Tensor2,
    s_txt: &Tensor2,
    labels: &[usize],
    exclude_query: bool,
) -> Result<(f64, f64, usize)> {
    let n = labels.len();
    let pool: Vec<(usize, ArrayView1<f64>, usize)> = (0..n)
        .map(|q| (q, s_img.row(q), labels[q]))
        .chain((0..n).map(|q| (n + q, s_txt.row(q), labels[q])))
        .collect();

    let mut i2all = Vec::with_capacity(n);
    let mut t2all = Vec::with_capacity(n);
    for (q, &label) in labels.iter().enumerate() {
        let img_pool: Vec<_> = pool
            .iter()
            .filter(|(id, _, _)| !(exclude_query && *id == q))
            .cloned()
            .collect();
        i2all.push(rank_one_query(q, s_img.row(q), label, &img_pool)?);
        let txt_pool: Vec<_> = pool
            .iter()
            .filter(|(id, _, _)| !(exclude_query && *id == n + q))
            .cloned()
            .collect();
        t2all.push(rank_one_query(q, s_txt.row(q), label, &txt_pool)?);
    }
    let (map_i2all, skip_a) = map_score(&i2all)?;
    let (map_t2all, skip_b) = map_score(&t2all)?;
    Ok((map_i2all, map_t2all, skip_a + skip_b))
}

/// Runs both task families and assembles the full report.
pub fn full_report(
    model: &mut CmGanModel,
    testset: &FeatureDataset,
    exclude_query: bool,
) -> Result<RetrievalReport> {
    let (map_i2t, map_t2i, skip_bi) = bimodal_retrieval(model, testset)?;
    let (map_i2all, map_t2all, skip_all) = allmodal_retrieval(model, testset, exclude_query)?;
    Ok(RetrievalReport {
        map_i2t,
        map_t2i,
        map_bi_avg: (map_i2t + map_t2i) / 2.0,
        map_i2all,
        map_t2all,
        map_all_avg: (map_i2all + map_t2all) / 2.0,
        skipped_queries: skip_bi + skip_all,
        degenerate_single_category: testset.distinct_categories() < 2,
    })
}

/// Per-category bi-modal MAP: (category index, map_i2t, map_t2i).
pub fn per_category_map(
    model: &mut CmGanModel,
    testset: &FeatureDataset,
) -> Result<Vec<(usize, f64, f64)>> {
    let s_img = model.encode(Modality::Image, testset.image(), Mode::Infer)?;
    let s_txt = model.encode(Modality::Text, testset.text(), Mode::Infer)?;
    let labels = testset.labels();
    let n = labels.len();
    let text_pool: Vec<_> = (0..n).map(|q| (q, s_txt.row(q), labels[q])).collect();
    let image_pool: Vec<_> = (0..n).map(|q| (q, s_img.row(q), labels[q])).collect();

    let mut out = Vec::new();
    for category in 0..testset.classes() {
        let queries: Vec<usize> = (0..n).filter(|&q| labels[q] == category).collect();
        if queries.is_empty() {
            continue;
        }
        let mut i2t = Vec::new();
        let mut t2i = Vec::new();
        for &q in &queries {
            i2t.push(rank_one_query(q, s_img.row(q), labels[q], &text_pool)?);
            t2i.push(rank_one_query(q, s_txt.row(q), labels[q], &image_pool)?);
        }
        let (map_i2t, _) = map_score(&i2t)?;
        let (map_t2i, _) = map_score(&t2i)?;
        out.push((category, map_i2t, map_t2i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cosine_basics() {
        let a = array![2.0, 1.0, -3.0];
        assert!((cosine_similarity(a.view(), a.view()).unwrap() - 1.0).abs() < 1e-12);

        let u = array![1.0, 0.0];
        let v = array![0.0, 1.0];
        assert!(cosine_similarity(u.view(), v.view()).unwrap().abs() < 1e-15);

        let p = array![1.0, 1.0];
        assert!(
            (cosine_similarity(p.view(), u.view()).unwrap() - std::f64::consts::FRAC_1_SQRT_2)
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn zero_vector_has_no_direction() {
        let z = array![0.0, 0.0];
        let u = array![1.0, 0.0];
        assert!(matches!(
            cosine_similarity(z.view(), u.view()).unwrap_err(),
            Error::ZeroVector
        ));
        let w = array![1.0, 0.0, 0.0];
        assert!(matches!(
            cosine_similarity(w.view(), u.view()).unwrap_err(),
            Error::Shape { .. }
        ));
    }

    #[test]
    fn average_precision_named_cases() {
        assert_eq!(average_precision(&[true, true, false]).unwrap(), 1.0);
        let ap = average_precision(&[true, false, true, false]).unwrap();
        assert!((ap - 0.8333333333).abs() < 1e-9);
        // single relevant item at rank k → 1/k
        assert!((average_precision(&[false, false, true, false]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            average_precision(&[false, false]).unwrap_err(),
            Error::UndefinedAp
        ));
    }

    #[test]
    fn map_averages_and_counts_skips() {
        let perfect = RankedList {
            query: 0,
            candidates: vec![0, 1],
            relevance: vec![true, false],
        };
        let half = RankedList {
            query: 1,
            candidates: vec![0, 1],
            relevance: vec![false, true],
        };
        let barren = RankedList {
            query: 2,
            candidates: vec![0, 1],
            relevance: vec![false, false],
        };
        let (map, skipped) = map_score(&[perfect, half, barren.clone()]).unwrap();
        assert!((map - 0.75).abs() < 1e-15);
        assert_eq!(skipped, 1);
        assert!(matches!(
            map_score(&[barren]).unwrap_err(),
            Error::NoValidQueries
        ));
    }

    #[test]
    fn ranking_breaks_ties_by_ascending_id() {
        let ranked = rank_by_similarity(&[0.5, 0.9, 0.5, 0.1], &[7, 3, 2, 9]);
        assert_eq!(ranked, vec![3, 2, 7, 9]);
    }

    fn clustered(n_per: usize) -> (Tensor2, Tensor2, Vec<usize>) {
        // Two categories on orthogonal directions, images and texts identical.
        let n = n_per * 2;
        let mut s = Tensor2::zeros((n, 2));
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i / n_per;
            s[[i, c]] = 1.0 + i as f64 * 1e-3;
            labels.push(c);
        }
        (s.clone(), s, labels)
    }

    #[test]
    fn identical_clusters_reach_map_one() {
        let (s_img, s_txt, labels) = clustered(5);
        let (i2t, t2i, skipped) = bimodal_from_common(&s_img, &s_txt, &labels).unwrap();
        assert_eq!((i2t, t2i, skipped), (1.0, 1.0, 0));
        let (i2all, t2all, _) = allmodal_from_common(&s_img, &s_txt, &labels, true).unwrap();
        assert_eq!((i2all, t2all), (1.0, 1.0));
    }

    #[test]
    fn allmodal_pool_sizes() {
        let (s_img, s_txt, labels) = clustered(3);
        let n = labels.len();
        // With query exclusion each query ranks 2n−1 candidates; the paired
        // other-modality instance stays in the pool.
        let pool: Vec<(usize, ndarray::ArrayView1<f64>, usize)> = (0..n)
            .map(|q| (q, s_img.row(q), labels[q]))
            .chain((0..n).map(|q| (n + q, s_txt.row(q), labels[q])))
            .collect();
        let filtered: Vec<_> = pool.iter().filter(|(id, _, _)| *id != 0).collect();
        assert_eq!(filtered.len(), 2 * n - 1);
    }

    #[test]
    fn brute_force_ap_agreement_small() {
        // Simple independent recomputation on a hand-built ranking.
        let sims = [0.9, 0.2, 0.7, 0.4];
        let labels = [0usize, 1, 0, 1];
        let ids = [0usize, 1, 2, 3];
        let ranked = rank_by_similarity(&sims, &ids);
        assert_eq!(ranked, vec![0, 2, 3, 1]);
        let relevance: Vec<bool> = ranked.iter().map(|&i| labels[i] == 0).collect();
        let ap = average_precision(&relevance).unwrap();
        assert!((ap - 1.0).abs() < 1e-15);
    }
}
