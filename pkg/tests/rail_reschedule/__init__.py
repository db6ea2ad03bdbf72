"""Tests for rail_reschedule package."""
