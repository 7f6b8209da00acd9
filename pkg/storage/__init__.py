# SpinLoop - Storage Module
# JSON schemas for matrices, states, systems, protocols and reports

from .schema import load_json, write_report

__all__ = ['load_json', 'write_report']
