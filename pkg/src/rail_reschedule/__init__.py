"""
rail-reschedule: railway re-scheduling with an inoculated evolutionary algorithm.

A permutation of trains is decoded into a conflict-free schedule by a
semi-greedy insertion scheduler; an evolutionary loop searches over
permutations, starting from a population built around the solution of the
unperturbed timetable.
"""

from rail_reschedule.cli import main


__all__ = ["main"]
