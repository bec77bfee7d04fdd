# Copyright 2026 The panclust Authors
# SPDX-License-Identifier: Apache-2.0

"""Learned instance clustering losses, panoptic metrics and post-processing."""

from ._panclust import (
    Error,
    class_names,
    dbscan,
    evaluate,
    fragmentation,
    fuse,
    generate,
    gradcheck,
    impurity,
    lovasz_softmax,
    pack_label,
    post_process,
    soft_matrix,
    stuff_ids,
    thing_ids,
    unpack_labels,
)

__all__ = [
    "Error",
    "class_names",
    "dbscan",
    "evaluate",
    "fragmentation",
    "fuse",
    "generate",
    "gradcheck",
    "impurity",
    "lovasz_softmax",
    "pack_label",
    "post_process",
    "soft_matrix",
    "stuff_ids",
    "thing_ids",
    "unpack_labels",
]
