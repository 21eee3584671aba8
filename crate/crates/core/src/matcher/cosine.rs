use crate::answer::{Clustering, MatchAssignment};
use crate::embedding::AnswerVector;

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na * nb))
}

/// Per-cluster centroids over in-vocabulary members. Clusters with no
/// in-vocabulary member get `None`.
pub fn centroids(clustering: &Clustering, gold_vecs: &[AnswerVector]) -> Vec<(String, Option<Vec<f64>>)> {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let members: Vec<&[f64]> = c
                .members
                .iter()
                .filter_map(|&i| gold_vecs.get(i))
                .filter(|v| !v.is_oov())
                .map(|v| v.vector.as_slice())
                .collect();
            let centroid = (!members.is_empty()).then(|| crate::cluster::centroid(&members));
            (c.label.clone(), centroid)
        })
        .collect()
}

/// Match against precomputed centroids.
pub fn match_centroids(
    prediction_index: usize,
    prediction: &AnswerVector,
    centroids: &[(String, Option<Vec<f64>>)],
    threshold: f64,
) -> MatchAssignment {
    if prediction.is_oov() {
        return MatchAssignment::unmatched(prediction_index);
    }
    let hits = centroids.iter().filter_map(|(label, c)| {
        let sim = cosine(&prediction.vector, c.as_deref()?)?;
        (sim >= threshold).then(|| label.clone())
    });
    MatchAssignment::split_evenly(prediction_index, hits)
}

/// A prediction matches every cluster whose centroid lies within
/// `threshold` cosine similarity. OOV and zero-norm vectors never match.
pub fn match_cosine(
    prediction_index: usize,
    prediction: &AnswerVector,
    clustering: &Clustering,
    gold_vecs: &[AnswerVector],
    threshold: f64,
) -> MatchAssignment {
    let cs = centroids(clustering, gold_vecs);
    match_centroids(prediction_index, prediction, &cs, threshold)
}
