"""Tests for category-based tool filtering."""

import pytest

from mean_field_choice.tool_categories import (
    TOOL_CATEGORIES,
    get_enabled_categories,
    get_enabled_tools,
    is_tool_enabled,
)


def test_all_categories_by_default():
    """Test that an unset or "all" value enables every category."""
    assert get_enabled_categories(None) == set(TOOL_CATEGORIES)
    assert get_enabled_categories(" ALL ") == set(TOOL_CATEGORIES)


def test_selected_categories():
    """Test parsing of a comma-separated category list."""
    assert get_enabled_categories("solve, Simulate") == {"solve", "simulate"}
    assert get_enabled_tools("metastability") == {"equilibria", "metastability_analysis"}


def test_invalid_category():
    """Test that unknown categories are rejected."""
    with pytest.raises(ValueError, match="Invalid categories"):
        get_enabled_categories("solve,billing")


def test_is_tool_enabled():
    """Test per-tool filtering."""
    assert is_tool_enabled("calibrate_dataset", "calibrate")
    assert not is_tool_enabled("calibrate_dataset", "solve")
    assert is_tool_enabled("master_spectrum")


def test_every_tool_in_one_category():
    """Test that no tool is listed twice."""
    tools = [tool for names in TOOL_CATEGORIES.values() for tool in names]
    assert len(tools) == len(set(tools))
