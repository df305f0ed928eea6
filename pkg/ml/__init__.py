"""
Машинное обучение Облака: численное ядро, диффузия, модели, обучение и инференс.
"""

__version__ = "1.0.0"
