"""LoRa star-network rail track monitoring: codec, PHY, sensors, node, gateway, simulator, cloud store."""

__version__ = "0.1.0"
