"""Tests for rail_reschedule.bench package."""
