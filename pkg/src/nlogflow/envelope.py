"""SOAP-style request/result envelopes as exchanged with jGASW services.

Rendering is template based so the produced bytes are stable; parsing goes
through ElementTree and matches elements by local name, so prefixes such as
``ns1:localResult`` are tolerated.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

from nlogflow.errors import FaultReceived, MalformedXml

SOAP_ENV = "http://schemas.xmlsoap.org/soap/envelope/"
XSI = "http://www.w3.org/2001/XMLSchema-instance"
XSD = "http://www.w3.org/2001/XMLSchema"

_HEAD = (
    f'<soapenv:Envelope xmlns:soapenv="{SOAP_ENV}" xmlns:xsd="{XSD}" xmlns:xsi="{XSI}">\n'
    "  <soapenv:Body>\n"
)
_TAIL = "  </soapenv:Body>\n</soapenv:Envelope>\n"


def _xmlns(namespace: str, prefix: str = "") -> str:
    if not namespace:
        return ""
    attr = f"xmlns:{prefix}" if prefix else "xmlns"
    return f" {attr}={quoteattr(namespace)}"


@dataclass(frozen=True)
class RequestEnvelope:
    operation: str
    namespace: str
    entries: tuple[tuple[str, str], ...]

    def render(self) -> str:
        ns = _xmlns(self.namespace)
        if not self.entries:
            return _HEAD + f"    <{self.operation}{ns}/>\n" + _TAIL
        body = [f"    <{self.operation}{ns}>\n"]
        for name, value in self.entries:
            body.append(f'      <{name} xsi:type="xsd:string"{ns}>{escape(value)}</{name}>\n')
        body.append(f"    </{self.operation}>\n")
        return _HEAD + "".join(body) + _TAIL


@dataclass(frozen=True)
class ResultEnvelope:
    result_element: str
    namespace: str
    entries: tuple[tuple[str, str], ...]

    def render(self) -> str:
        tag = f"ns1:{self.result_element}" if self.namespace else self.result_element
        ns = _xmlns(self.namespace, "ns1")
        body = [f"    <{tag}{ns}>\n"]
        for name, value in self.entries:
            body.append(f"      <{name}>{escape(value)}</{name}>\n")
        body.append(f"    </{tag}>\n")
        return _HEAD + "".join(body) + _TAIL


def render_fault(message: str, namespace: str = "", code: str = "soapenv:Server") -> str:
    ns = _xmlns(namespace, "ns1")
    tag = "ns1:SOAPException" if namespace else "SOAPException"
    return (
        _HEAD
        + "    <soapenv:Fault>\n"
        + f"      <faultcode>{escape(code)}</faultcode>\n"
        + f"      <faultstring>{escape(message)}</faultstring>\n"
        + "      <detail>\n"
        + f"        <{tag}{ns}><message>{escape(message)}</message></{tag}>\n"
        + "      </detail>\n"
        + "    </soapenv:Fault>\n"
        + _TAIL
    )


def local_name(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def namespace_of(tag: str) -> str:
    return tag[1:].split("}", 1)[0] if tag.startswith("{") else ""


def parse_xml(text: str) -> ET.Element:
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedXml(f"malformed envelope: {exc}") from None


def raise_for_fault(root: ET.Element) -> None:
    for el in root.iter():
        name = local_name(el.tag)
        if name in ("Fault", "SOAPException"):
            message = ""
            for sub in root.iter():
                if local_name(sub.tag) in ("faultstring", "message") and (sub.text or "").strip():
                    message = sub.text.strip()
                    break
            raise FaultReceived(f"service fault: {message or 'SOAPException'}", message)


def body_payload(root: ET.Element) -> ET.Element:
    """The first element inside ``Body``, or the root for bare documents."""
    if local_name(root.tag) == "Envelope":
        for child in root:
            if local_name(child.tag) == "Body":
                kids = list(child)
                if not kids:
                    raise MalformedXml("empty SOAP body")
                return kids[0]
        raise MalformedXml("envelope has no Body")
    return root


def parse_request(text: str) -> RequestEnvelope:
    root = parse_xml(text)
    op = body_payload(root)
    entries = tuple((local_name(c.tag), (c.text or "").strip()) for c in op)
    return RequestEnvelope(local_name(op.tag), namespace_of(op.tag), entries)


def parse_result_envelope(text: str, result_element: str | None = None) -> ResultEnvelope:
    """Generic decode into an ordered markup -> value list."""
    root = parse_xml(text)
    raise_for_fault(root)
    target = find_result(root, result_element) if result_element else body_payload(root)
    entries = tuple((local_name(c.tag), (c.text or "").strip()) for c in target)
    return ResultEnvelope(local_name(target.tag), namespace_of(target.tag), entries)


def find_result(root: ET.Element, result_element: str) -> ET.Element:
    for el in root.iter():
        if local_name(el.tag) == result_element:
            return el
    raise MalformedXml(f"no <{result_element}> element in response")
