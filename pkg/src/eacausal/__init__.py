"""Causal effect of irrelevant sentences in extract-and-generate summarization.

Exact information-theoretic quantities on a small structural model, text
metrics, count-based sequence models, the extract-and-generate pipeline and
a classifier-based estimator of the confounding on labelled corpora.
"""
from .info import (DistributionError, JointDistribution, conditional_entropy, entropy,
                   marginalize, mutual_information)
from .kernels import BACKEND
from .sem import (CausalReport, ExampleKind, Sem, SemError, build_joint,
                  causal_effect_irrelevant, do, example_sem, information_flow, intervene,
                  random_sem, sample_sem)
from .textmetrics import (Score, TokenSeq, meteor_lite, perspective, rouge_l, rouge_n,
                          tokenize)
from .seqmodels import NgramSeq2Seq, SequenceModel, log_likelihood, train_ngram
from .pipeline import Answer, Example, extractive_postprocess, run_inference
from .confound import CeEstimate, RelevanceClassifier, estimate_ce, train_classifier
from .stats import spearman, welch_t
from .corpus import Verbalizer, load_corpus, save_corpus, synthesize_corpus

__version__ = "0.1.0"
