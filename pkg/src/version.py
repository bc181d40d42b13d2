"""
Version information for the radial k-Hessian toolkit
"""

__version__ = "1.0.0"
__release_date__ = "2026-10-18"
__app_name__ = "khessian-radial"
__author__ = "khessian-radial maintainers"


def get_version_string():
    """Returns formatted version string"""
    return f"{__app_name__} v{__version__}"


def get_full_version_info():
    """Returns complete version information (embedded in every JSON report)"""
    return {
        "version": __version__,
        "release_date": __release_date__,
        "app_name": __app_name__,
        "author": __author__,
    }
