"""In-memory pipeline runs shared by the slower tests."""

from socialsat.evaluation import label_dataset
from socialsat.features.matrix import ENGINES, build_feature_matrix
from socialsat.pipeline import process_session


def channel_sets(corpus):
    return [process_session(s.tracks, corpus.calibration, s.faces, s.markers) for s in corpus.sessions]


def corpus_datasets(corpus, engines=ENGINES, sets=None):
    """Labelled feature matrices per engine, rows sorted by session id."""
    sets = channel_sets(corpus) if sets is None else sets
    responses = {s.session_id: s.response for s in corpus.sessions}
    return {e: label_dataset(build_feature_matrix(sets, e), responses) for e in engines}
