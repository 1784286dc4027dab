"""Shared fixtures."""

from __future__ import annotations

import pytest


@pytest.fixture
def reach_src() -> str:
    return """
func reach(G: Matrix<s, s, bool>, src: Vector<s, bool>) -> Vector<s, bool> {
    v = src;
    for i in 0..s {
        v += v * G;
    }
    return v;
}
"""


@pytest.fixture
def sssp_src() -> str:
    return """
func sssp(G: Matrix<s, s, trop>, src: Vector<s, trop>) -> Vector<s, trop> {
    v = src;
    for i in 0..s {
        v += v * G;
    }
    return v;
}
"""
