# Channel platform: TCP, UDP and SOAP channels behind one handler
